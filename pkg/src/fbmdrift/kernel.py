"""The square-integrable kernel K_H (H < 1/2) and the operator it induces on step functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .fbm import HurstLike, Regime, as_hurst, covariance
from .hilbert import StepFunction, sigmoid_rule

__all__ = [
    "kernel_constant",
    "kernel_KH",
    "kernel_KH_dt",
    "kernel_identity_error",
    "calibrate_kernel_constant",
    "OperatorImage",
    "operator_KH",
]


def _rough(h: HurstLike) -> float:
    hp = as_hurst(h)
    if hp.regime is not Regime.ROUGH:
        raise ValueError(f"K_H is implemented for H < 1/2 only, got H={hp.h}")
    return hp.h


def kernel_constant(h: HurstLike) -> float:
    """d_H = (2H / ((1 - 2H) B(1 - 2H, H + 1/2)))^(1/2)."""
    H = _rough(h)
    return float(np.sqrt(2 * H / ((1 - 2 * H) * special.beta(1 - 2 * H, H + 0.5))))


def _inner_beta(t, s, H):
    # int_s^t v^(H-3/2) (v-s)^(H-1/2) dv = s^(2H-1) B(1-2H, H+1/2) (1 - I_{s/t}(1-2H, H+1/2))
    a, b = 1 - 2 * H, H + 0.5
    return s ** (2 * H - 1) * special.beta(a, b) * special.betaincc(a, b, s / t)


def _inner_quad(t, s, H):
    val, _ = integrate.quad(lambda v: v ** (H - 1.5), s, t, weight="alg", wvar=(H - 0.5, 0.0))
    return val


def kernel_KH(t, s, h: HurstLike, method: str = "beta", d_H: float | None = None):
    """K_H(t, s) for 0 < s < t, vectorised over broadcastable (t, s).

    The inner integral is an incomplete beta function (`method="beta"`) or
    adaptive quadrature with an algebraic endpoint weight (`method="quad"`).
    """
    H = _rough(h)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(s >= t):
        raise ValueError("K_H(t, s) requires 0 < s < t")
    e = H - 0.5
    if method == "beta":
        inner = _inner_beta(t, s, H)
    elif method == "quad":
        tb, sb = np.broadcast_arrays(t, s)
        inner = np.vectorize(_inner_quad)(tb, sb, H)
    else:
        raise ValueError(f"unknown method {method!r}")
    c = kernel_constant(H) if d_H is None else d_H
    out = c * ((t / s) ** e * (t - s) ** e - e * s ** (-e) * inner)
    return float(out) if out.ndim == 0 else out


def kernel_KH_dt(t, s, h: HurstLike, d_H: float | None = None):
    """dK_H/dt (t, s) = d_H (H - 1/2) (t/s)^(H-1/2) (t - s)^(H-3/2)."""
    H = _rough(h)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(s >= t):
        raise ValueError("dK_H/dt requires 0 < s < t")
    c = kernel_constant(H) if d_H is None else d_H
    out = c * (H - 0.5) * (t / s) ** (H - 0.5) * (t - s) ** (H - 1.5)
    return float(out) if out.ndim == 0 else out


def _kernel_product_integral(s, t, H, d_H=None) -> float:
    lo = min(s, t)
    val, _ = integrate.quad(
        lambda u: kernel_KH(t, u, H, d_H=d_H) * kernel_KH(s, u, H, d_H=d_H),
        0.0,
        lo,
        limit=200,
        epsabs=0.0,
        epsrel=1e-11,
    )
    return val


def kernel_identity_error(h: HurstLike, points, d_H: float | None = None) -> np.ndarray:
    """Relative error of int_0^{s^t} K_H(t,u) K_H(s,u) du against R_H(s, t) at each (s, t)."""
    H = _rough(h)
    errs = []
    for s, t in points:
        q = _kernel_product_integral(s, t, H, d_H)
        r = covariance(s, t, H)
        errs.append(abs(q - r) / abs(r))
    return np.array(errs)


def calibrate_kernel_constant(h: HurstLike, points, tol: float = 1e-3) -> dict:
    """Check d_H against the covariance identity; refit it by least squares if the check fails."""
    H = _rough(h)
    d_H = kernel_constant(H)
    q = np.array([_kernel_product_integral(s, t, H) for s, t in points])
    r = np.array([covariance(s, t, H) for s, t in points])
    max_err = float(np.max(np.abs(q - r) / np.abs(r)))
    out = {"h": H, "d_H": d_H, "max_rel_error": max_err, "recalibrated": False}
    if max_err > tol:
        # the identity is quadratic in d_H: q = d_H^2 * q_unit
        q_unit = q / d_H**2
        out["d_H"] = float(np.sqrt(np.dot(q_unit, r) / np.dot(q_unit, q_unit)))
        out["recalibrated"] = True
    return out


@dataclass(frozen=True)
class OperatorImage:
    """K_H(phi) as a function on [0, T]; evaluated cellwise from K_H values."""

    phi: StepFunction
    h: float
    T: float

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.shape[0], self.phi.d))
        t = self.phi.grid.times
        n = self.phi.grid.n_steps
        vals = self.phi.values
        k_of = np.floor(s / self.phi.grid.dt).astype(int)
        for k in np.unique(k_of):
            sel = (k_of == k) & (s > 0) & (s < self.T)
            if not np.any(sel) or k >= n:
                continue
            out[sel] = self._cell(k, s[sel], t, n, vals)
        return out

    def _cell(self, k, s, t, n, vals):
        H, T = self.h, self.T
        phi_s = vals[k]
        # K(T,s) phi(s) + sum over later cells of (phi_m - phi(s)) * (K(t_{m+1}, s) - K(t_m, s))
        val = kernel_KH(T, s, H)[:, None] * phi_s
        if k + 1 < n:
            right = np.minimum(t[k + 2 :], T)
            left = np.minimum(t[k + 1 : n], T)
            Kr = kernel_KH(right[None, :], s[:, None], H)
            Kl = kernel_KH(left[None, :], s[:, None], H)
            val = val + (Kr - Kl) @ (vals[k + 1 :] - phi_s)
        if T > t[n] * (1 + 1e-12):
            # zero tail between the end of the grid and T
            val = val + (kernel_KH(T, s, H) - kernel_KH(t[n], s, H))[:, None] * (-phi_s)
        return val

    def l2_norm_sq(self, n_nodes: int = 48) -> float:
        """||K_H(phi)||^2 in L^2([0, T]; R^d), cell by cell on a sigmoid-Gauss rule."""
        t = self.phi.grid.times
        n = self.phi.grid.n_steps
        vals = self.phi.values
        lo = t[:-1]
        hi = np.minimum(t[1:], self.T)
        keep = hi > lo
        nodes, weights = sigmoid_rule(lo[keep], hi[keep], n_nodes)
        total = 0.0
        for k in np.flatnonzero(keep):
            v = self._cell(k, nodes[k], t, n, vals)
            total += float(np.sum(weights[k] * np.sum(v**2, axis=1)))
        return total


def operator_KH(phi: StepFunction, h: HurstLike, T: float | None = None) -> OperatorImage:
    H = _rough(h)
    T = phi.grid.T if T is None else float(T)
    lo, hi = phi.support
    if hi > 0 and phi.grid.times[hi] > T * (1 + 1e-12):
        raise ValueError(f"support of phi extends past T={T}")
    return OperatorImage(phi, H, T)
