"""Inner products and norms on step functions of the fBm Hilbert space.

All kernels that integrate |r - s|^(2H-2) over rectangles are evaluated in
closed form. Only the rough-regime K_T norm needs a one-dimensional
quadrature; `sigmoid_rule` flattens the algebraic endpoint singularities
before Gauss-Legendre is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .fbm import HurstLike, Regime, TimeGrid, as_hurst, covariance, increment_covariance

__all__ = [
    "StepFunction",
    "inner_product_indicator",
    "step_inner_product",
    "step_norm",
    "pair_integral",
    "abs_norm_high",
    "lp_norm",
    "kt_norm",
    "random_step_functions",
    "sigmoid_rule",
]


def sigmoid_rule(a, b, n_nodes: int = 48, q: int = 4):
    """Nodes and weights on each [a_i, b_i] after the substitution u -> I_u(q, q).

    The map has q - 1 vanishing derivatives at both ends, so integrands like
    (b - s)^(2H - 1) become Hoelder of order ~2qH and Gauss-Legendre converges fast.
    Returns arrays of shape (len(a), n_nodes).
    """
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * (x + 1.0)
    psi = special.betainc(q, q, u)
    dpsi = (u * (1.0 - u)) ** (q - 1) / special.beta(q, q)
    a = np.atleast_1d(np.asarray(a, dtype=float))[:, None]
    b = np.atleast_1d(np.asarray(b, dtype=float))[:, None]
    nodes = np.clip(a + (b - a) * psi, np.nextafter(a, b), np.nextafter(b, a))
    weights = (b - a) * 0.5 * w * dpsi
    return nodes, weights


@dataclass(frozen=True)
class StepFunction:
    """R^d-valued function equal to values[k] on [t_k, t_{k+1}) and zero elsewhere."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_steps:
            raise ValueError(f"expected {self.grid.n_steps} cell values, got {v.shape[0]}")
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, grid: TimeGrid, start: int, stop: int, d: int = 1) -> "StepFunction":
        """1 on cells start..stop-1 in every component."""
        v = np.zeros((grid.n_steps, d))
        v[start:stop] = 1.0
        return cls(grid, v)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def support(self) -> tuple[int, int]:
        nz = np.flatnonzero(np.any(self.values != 0, axis=1))
        if nz.size == 0:
            return (0, 0)
        return (int(nz[0]), int(nz[-1]) + 1)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.floor(t / self.grid.dt).astype(int)
        inside = (t >= 0) & (k < self.grid.n_steps)
        out = np.zeros((t.shape[0], self.d))
        out[inside] = self.values[k[inside]]
        return out


def inner_product_indicator(a, b, c, d, h: HurstLike) -> float:
    """<1_[a,b], 1_[c,d]> in the fBm Hilbert space."""
    if a > b or c > d:
        raise ValueError("interval endpoints must satisfy a <= b and c <= d")
    if min(a, c) < 0:
        raise ValueError("intervals must lie in [0, inf)")
    return covariance(b, d, h) - covariance(b, c, h) - covariance(a, d, h) + covariance(a, c, h)


def _check_same_grid(phi: StepFunction, psi: StepFunction):
    if phi.grid != psi.grid:
        raise ValueError("step functions live on different grids")
    if phi.d != psi.d:
        raise ValueError("step functions have different dimensions")


def step_inner_product(phi: StepFunction, psi: StepFunction, h: HurstLike) -> float:
    _check_same_grid(phi, psi)
    cov = increment_covariance(phi.grid, h)
    return float(np.sum(phi.values * cov.matvec(psi.values)))


def step_norm(phi: StepFunction, h: HurstLike) -> float:
    return float(np.sqrt(max(step_inner_product(phi, phi, h), 0.0)))


def pair_integral(a, b, c, d, h: float):
    """Integral of |r - s|^(2H-2) over [a,b] x [c,d], from the antiderivative of the signed power.

    Valid for H > 1/2 (the integrand is then locally integrable on the diagonal).
    """
    H2 = 2.0 * h

    def F(x):
        return np.abs(x) ** H2

    return (F(b - c) + F(a - d) - F(b - d) - F(a - c)) / (H2 * (H2 - 1.0))


def abs_norm_high(phi: StepFunction, h: HurstLike) -> float:
    """||phi||_{|H|}: the absolute-value norm, smooth regime only."""
    hp = as_hurst(h)
    if hp.regime is not Regime.SMOOTH:
        raise ValueError("the |H| norm is only defined for H > 1/2")
    t = phi.grid.times
    a, b = t[:-1], t[1:]
    P = pair_integral(a[:, None], b[:, None], a[None, :], b[None, :], hp.h)
    absv = np.abs(phi.values)
    alpha = hp.h * (2.0 * hp.h - 1.0)
    total = alpha * np.einsum("ij,ik,kj->", absv, P, absv)
    return float(np.sqrt(max(total, 0.0)))


def lp_norm(phi: StepFunction, p: float) -> float:
    """L^p([0, inf); R^d) norm with the Euclidean norm on R^d."""
    mag = np.linalg.norm(phi.values, axis=1)
    return float((np.sum(mag**p) * phi.grid.dt) ** (1.0 / p))


def kt_norm(phi: StepFunction, h: HurstLike, T: float | None = None, n_nodes: int = 48) -> float:
    """||phi||_{K_T} for H < 1/2 and supp(phi) within [0, T]."""
    hp = as_hurst(h)
    if hp.regime is not Regime.ROUGH:
        raise ValueError("the K_T norm is only used for H < 1/2")
    H = hp.h
    grid = phi.grid
    T = grid.T if T is None else float(T)
    lo, hi = phi.support
    if hi > 0 and grid.times[hi] > T * (1 + 1e-12):
        raise ValueError(f"support of phi extends past T={T}")
    if hi == 0:
        return 0.0

    t = grid.times
    n = grid.n_steps
    # cells beyond the grid up to T carry zero
    edges = t if T <= t[-1] * (1 + 1e-12) else np.append(t, T)
    vals = phi.values if edges.shape[0] == n + 1 else np.vstack([phi.values, np.zeros((1, phi.d))])
    a, b = edges[:-1], edges[1:]
    H2 = 2.0 * H

    sq = np.sum(vals**2, axis=1)
    weighted = ((T - a) ** H2 - np.clip(T - b, 0, None) ** H2 + b**H2 - a**H2) / H2
    first = float(np.sum(sq * weighted))

    e = H - 0.5
    nodes, weights = sigmoid_rule(a, b, n_nodes)
    second = 0.0
    for k in range(a.shape[0]):
        jumps = np.linalg.norm(vals[k + 1 :] - vals[k], axis=1)
        if not np.any(jumps):
            continue
        s = nodes[k][:, None]
        # integral of (t - s)^(H - 3/2) over each later cell
        inner = ((a[k + 1 :] - s) ** e - (b[k + 1 :] - s) ** e) / (-e)
        second += float(np.sum(weights[k] * (inner @ jumps) ** 2))
    return float(np.sqrt(first + second))


def random_step_functions(
    count: int,
    seed: int = 1234,
    sizes=(8, 16, 32),
    T: float = 1.0,
    d: int = 1,
) -> list[StepFunction]:
    """Seeded test set: i.i.d. standard normal levels on dyadic grids, cycling through `sizes`."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = sizes[k % len(sizes)]
        grid = TimeGrid.from_horizon(T, n)
        v = rng.standard_normal((n, d))
        while not np.any(v):
            v = rng.standard_normal((n, d))
        out.append(StepFunction(grid, v))
    return out
