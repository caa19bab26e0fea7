"""Drift models dX = -f(X) theta dt + sigma dB and their Euler integration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fbm import FbmPath, TimeGrid

__all__ = [
    "DriftModel",
    "SolutionPath",
    "HypothesisCertificate",
    "IntegrationError",
    "linear_model",
    "cubic_model",
    "coupled2d_model",
    "MODELS",
    "get_model",
    "certify_hypotheses",
    "euler_paths",
    "integrate_euler",
]


@dataclass(frozen=True)
class DriftModel:
    """Drift f: R^m -> R^{m x l} with parameter theta in R^l and constant diffusion sigma (m x d).

    All evaluators are vectorised over leading axes of x (shape (..., m)):
      f(x)    -> (..., m, l)
      jac(x)  -> (..., l, m, m), jac[..., j, a, b] = d f_{a j} / d x_b
      hess(x) -> (..., l, m, m, m), second derivatives of each column f_j
    """

    name: str
    m: int
    l: int
    d: int
    theta: np.ndarray
    sigma: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    L1: float
    growth: tuple = (1.0, 1.0)
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float).reshape(self.m, self.d)
        if theta.shape != (self.l,):
            raise ValueError(f"theta must have length l={self.l}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)

    def drift(self, x: np.ndarray) -> np.ndarray:
        """f(x) theta, shape (..., m)."""
        return self.f(x) @ self.theta

    def drift_jacobian(self, x: np.ndarray) -> np.ndarray:
        """sum_j theta_j grad f_j(x), shape (..., m, m)."""
        return np.einsum("j,...jab->...ab", self.theta, self.jac(x))

    def g(self, x: np.ndarray) -> np.ndarray:
        """g_j(x) = f_j(x)^T sigma for every j, shape (..., l, d)."""
        return np.einsum("...aj,ac->...jc", self.f(x), self.sigma)

    def grad_g(self, x: np.ndarray) -> np.ndarray:
        """d g_j^c / d x_b = (sigma^T grad f_j)_{cb}, shape (..., l, d, m)."""
        return np.einsum("ac,...jab->...jcb", self.sigma, self.jac(x))


def linear_model(theta=1.0, sigma=1.0, m: int = 1, d: Optional[int] = None) -> DriftModel:
    """Fractional Ornstein-Uhlenbeck: f(x) = x as a single column (l = 1)."""
    d = m if d is None else d
    th = float(np.atleast_1d(theta)[0])
    sig = np.asarray(sigma, dtype=float)
    sig = float(sig) * np.eye(m, d) if sig.ndim == 0 else sig.reshape(m, d)
    eye = np.eye(m)

    def f(x):
        return np.asarray(x, dtype=float)[..., :, None]

    def jac(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (1, m, m))

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (1, m, m, m))

    return DriftModel("linear", m, 1, d, [th], sig, f, jac, L1=th, growth=(max(1.0, np.sqrt(m)), 1.0), hess=hess)


def cubic_model(theta=(1.0, 1.0), sigma=1.0) -> DriftModel:
    """Scalar model with f(x) = (x, x^3); dissipative when theta_1 > 0 and theta_2 >= 0."""
    th = np.asarray(theta, dtype=float)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, x**3], axis=-1)

    def jac(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones_like(x), 3.0 * x**2], axis=-2)[..., None]

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.zeros_like(x), 6.0 * x], axis=-2)[..., None, None]

    L1 = float(th[0]) if th[1] >= 0 else float("nan")
    return DriftModel("cubic", 1, 2, 1, th, [[float(np.ravel(sigma)[0])]], f, jac, L1=L1, growth=(5.0, 3.0), hess=hess)


def coupled2d_model(theta=1.0, sigma=None, coupling: float = 0.5) -> DriftModel:
    """Two coupled cubics with a skew linear coupling that leaves the symmetric Jacobian >= I.

    f(x) = (x1 + x1^3 + c x2, x2 + x2^3 - c x1) as one column.
    """
    th = float(np.atleast_1d(theta)[0])
    c = float(coupling)
    sig = np.eye(2) if sigma is None else np.asarray(sigma, dtype=float)
    sig = float(sig) * np.eye(2) if sig.ndim == 0 else sig.reshape(2, -1)

    def f(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x1 + x1**3 + c * x2, x2 + x2**3 - c * x1], axis=-1)[..., None]

    def jac(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        J = np.empty(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1 + 3 * x1**2
        J[..., 0, 1] = c
        J[..., 1, 0] = -c
        J[..., 1, 1] = 1 + 3 * x2**2
        return J[..., None, :, :]

    def hess(x):
        x = np.asarray(x, dtype=float)
        Hs = np.zeros(x.shape[:-1] + (2, 2, 2))
        Hs[..., 0, 0, 0] = 6 * x[..., 0]
        Hs[..., 1, 1, 1] = 6 * x[..., 1]
        return Hs[..., None, :, :, :]

    return DriftModel("coupled2d", 2, 1, sig.shape[1], [th], sig, f, jac, L1=th, growth=(6.0, 3.0), hess=hess)


MODELS = {"linear": linear_model, "cubic": cubic_model, "coupled2d": coupled2d_model}


def get_model(name: str, theta=None, sigma=None, **kwargs) -> DriftModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; registry has {sorted(MODELS)}") from None
    if theta is not None:
        kwargs["theta"] = theta
    if sigma is not None:
        kwargs["sigma"] = sigma
    return factory(**kwargs)


@dataclass
class HypothesisCertificate:
    min_eigenvalue: float
    eigenvalue_witness: np.ndarray
    min_dissipativity_ratio: float
    dissipativity_witness: tuple
    growth_L2: float
    growth_gamma: float
    growth_witness: np.ndarray
    L1_claimed: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def L1_certificate(self) -> float:
        return min(self.min_eigenvalue, self.min_dissipativity_ratio)


def certify_hypotheses(
    model: DriftModel,
    probe_count: int = 2000,
    probe_radius: float = 3.0,
    seed: int = 0,
    points: Optional[np.ndarray] = None,
    tol: float = 1e-8,
) -> HypothesisCertificate:
    """Probe the dissipativity hypothesis and the polynomial growth bound at random states.

    Never raises; violations are listed with the witnessing state.
    """
    rng = np.random.default_rng(seed)
    xs = [np.zeros((1, model.m)), probe_radius * rng.standard_normal((probe_count, model.m))]
    if points is not None:
        xs.append(np.asarray(points, dtype=float).reshape(-1, model.m))
    x = np.concatenate(xs)

    A = model.drift_jacobian(x)
    eig = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))[:, 0]
    i_min = int(np.argmin(eig))

    y = x[rng.permutation(x.shape[0])]
    dx = x - y
    nrm2 = np.sum(dx**2, axis=-1)
    ok = nrm2 > 1e-12
    ratio = np.sum(dx * (model.drift(x) - model.drift(y)), axis=-1)[ok] / nrm2[ok]
    j_min = int(np.argmin(ratio))
    pair = (x[ok][j_min], y[ok][j_min])

    L2_claim, gamma = model.growth
    size = np.linalg.norm(model.f(x).reshape(x.shape[0], -1), axis=1) + np.linalg.norm(
        model.jac(x).reshape(x.shape[0], -1), axis=1
    )
    fit = size / (1.0 + np.linalg.norm(x, axis=1) ** gamma)
    k_max = int(np.argmax(fit))

    cert = HypothesisCertificate(
        min_eigenvalue=float(eig[i_min]),
        eigenvalue_witness=x[i_min],
        min_dissipativity_ratio=float(ratio[j_min]),
        dissipativity_witness=pair,
        growth_L2=float(fit[k_max]),
        growth_gamma=float(gamma),
        growth_witness=x[k_max],
        L1_claimed=float(model.L1),
    )
    if not eig[i_min] >= model.L1 - tol:
        cert.violations.append(f"Jacobian hypothesis: min eigenvalue {eig[i_min]:.6g} < L1 at x={x[i_min]}")
    if not ratio[j_min] >= model.L1 - tol:
        cert.violations.append(f"one-sided dissipativity: ratio {ratio[j_min]:.6g} < L1 at pair {pair}")
    if not min(eig[i_min], ratio[j_min]) > 0:
        cert.violations.append("drift is not dissipative: no positive L1 certificate")
    if fit[k_max] > L2_claim:
        cert.violations.append(f"growth bound: L2 fit {fit[k_max]:.6g} exceeds {L2_claim} at x={x[k_max]}")
    return cert


@dataclass(frozen=True)
class SolutionPath:
    grid: TimeGrid
    values: np.ndarray
    model_name: str
    noise_seed: Optional[int] = None
    noise_index: Optional[int] = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def m(self) -> int:
        return self.values.shape[-1]


class IntegrationError(FloatingPointError):
    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


def euler_paths(
    model: DriftModel,
    dB: np.ndarray,
    x0,
    dt: float,
    initial_substeps: int = 0,
    substep_factor: int = 1,
) -> np.ndarray:
    """X_{i+1} = X_i - f(X_i) theta dt + sigma dB_i for noise increments dB of shape (..., n, d).

    For the first `initial_substeps` steps the drift is advanced with
    `substep_factor` smaller steps before the noise increment is added.
    Returns (..., n+1, m).
    """
    dB = np.asarray(dB, dtype=float)
    if dB.shape[-1] != model.d:
        raise ValueError(f"noise has dimension {dB.shape[-1]}, model expects d={model.d}")
    n = dB.shape[-2]
    batch = dB.shape[:-2]
    X = np.empty(batch + (n + 1, model.m))
    X[..., 0, :] = np.broadcast_to(np.asarray(x0, dtype=float), batch + (model.m,))
    noise = dB @ model.sigma.T
    x = X[..., 0, :].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            if i < initial_substeps and substep_factor > 1:
                h = dt / substep_factor
                for _ in range(substep_factor):
                    x = x - h * model.drift(x)
                x = x + noise[..., i, :]
            else:
                x = x - dt * model.drift(x) + noise[..., i, :]
            X[..., i + 1, :] = x
    finite = np.isfinite(X).reshape(-1, n + 1, model.m).all(axis=(0, 2))
    if not finite.all():
        step = int(np.argmin(finite))
        raise IntegrationError(
            step,
            f"non-finite state at step {step} (t={step * dt:.6g}); "
            f"check dissipativity of {model.name!r} or reduce dt",
        )
    return X


def integrate_euler(
    model: DriftModel,
    noise: FbmPath,
    x0,
    initial_substeps: int = 0,
    substep_factor: int = 1,
) -> SolutionPath:
    grid = noise.grid
    X = euler_paths(model, noise.increments, x0, grid.dt, initial_substeps, substep_factor)
    A = model.drift_jacobian(X[:-1])
    stiffness = float(grid.dt * np.max(np.linalg.norm(A, ord=2, axis=(-2, -1))))
    meta = {"dt_times_jacobian": stiffness, "stable": stiffness < 0.5}
    return SolutionPath(grid, X, model.name, noise.seed, noise.path_index, meta)
