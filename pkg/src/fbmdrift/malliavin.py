"""Malliavin derivatives of Euler solutions and discrete Skorohod integrals.

Discretisation. The Euler chain X_{i+1} = X_i - f(X_i) theta dt + sigma dB_i is a
smooth function of the Gaussian increments dB_0, ..., dB_{n-1}. Its derivative
with respect to dB_k is the Euler solution of Z' = -sum_j theta_j grad f_j(X) Z
started from Z = sigma at node k + 1; we file it under s = t_{k+1}, so D_s X_s = sigma.

A process u = g(X) is turned into cell values u_i (left rule) or
(u_i + u_{i+1}) / 2 (trapezoid rule). Its divergence is the pathwise sum
sum_i u_i . dB_i minus the trace term sum_{i,k} gamma(i - k) Tr[d u_i / d dB_k],
gamma being the increment covariance. This is the exact adjoint of the
discrete derivative, so duality holds to Monte Carlo precision for every H.
With the trapezoid rule, delta(B 1_[0,T]) = (B_T^2 - T^{2H}) / 2 holds identically.

The derivative is stored on a coarse set of pivot nodes. Between pivots it is
interpolated linearly in s; on the last block before t the right anchor is
D_t X_t = sigma. With every node a pivot the interpolation is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fbm import FbmPath, HurstLike, IncrementCovariance, TimeGrid, increment_covariance, sample_fbm_batch
from .sde import DriftModel, SolutionPath, euler_paths, linear_model

__all__ = [
    "DEFAULT_MAX_PIVOTS",
    "RULES",
    "pivot_nodes",
    "trace_weights",
    "MalliavinGrid",
    "propagate_derivative",
    "DerivedProcess",
    "derived_process",
    "brownian_process",
    "deterministic_process",
    "SkorohodResult",
    "skorohod_integral",
    "skorohod_cells_batch",
    "DerivativeIncrementReport",
    "derivative_increments_check",
    "G_FUNCTIONS",
    "DualityReport",
    "DUALITY_PAIRS",
    "duality_check",
]

DEFAULT_MAX_PIVOTS = 512


def pivot_nodes(n: int, n_pivots: Optional[int] = None) -> np.ndarray:
    """Pivot node indices in 1..n, evenly spread; n_pivots defaults to min(n, 512)."""
    n_s = min(n, DEFAULT_MAX_PIVOTS) if n_pivots is None else int(n_pivots)
    if not 1 <= n_s <= n:
        raise ValueError(f"pivot count must lie in [1, {n}], got {n_s}")
    return np.unique(np.round(np.linspace(1, n, n_s)).astype(int))


def trace_weights(nodes, pivots: np.ndarray, row: np.ndarray, lag_offset: int = 1):
    """Weights turning pivot derivatives into the covariance contraction at each node.

    For node i, sum_{s=1}^{i} gamma(i + lag_offset - s) D_s(.)_i is approximated by
    W[i] @ D_pivots(.)_i + w_diag[i] * D_i(.)_i. Returns W (len(nodes), n_s)
    and w_diag (len(nodes),).
    """
    nodes = np.atleast_1d(np.asarray(nodes, dtype=np.int64))[:, None]
    p = np.asarray(pivots, dtype=np.int64)[None, :]
    n = row.shape[0]
    off = int(lag_offset)
    P0 = np.concatenate([[0.0], np.cumsum(row)])
    P1 = np.concatenate([[0.0], np.cumsum(np.arange(n) * row)])
    nxt = np.append(p[0, 1:], np.iinfo(np.int64).max)[None, :]

    active = p <= nodes
    right_is_pivot = nxt <= nodes
    R = np.where(right_is_pivot, nxt, nodes)
    nonempty = active & (R > p)
    # nodes s in [p, R-1] have lags r = i + off - s in [i + off + 1 - R, i + off - p]
    lo = np.clip(nodes + off + 1 - R, 0, n)
    hi = np.clip(nodes + off + 1 - p, 0, n)
    S0 = np.where(nonempty, P0[hi] - P0[lo], 0.0)
    S1 = np.where(nonempty, P1[hi] - P1[lo], 0.0)
    delta = np.where(nonempty, R - p, 1)
    offset = (nodes + off - p) * S0 - S1  # sum of (s - p) gamma(r)
    w_right = offset / delta
    W = S0 - w_right
    W[:, 1:] += np.where(right_is_pivot[:, :-1], w_right[:, :-1], 0.0)
    g_diag = row[off] if off < n else 0.0
    w_diag = np.sum(np.where(right_is_pivot, 0.0, w_right), axis=1) + np.where(nodes[:, 0] >= 1, g_diag, 0.0)
    return W, w_diag


RULES = ("trapezoid", "left")


def _check_rule(rule: str):
    if rule not in RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")


def _derivative_sweep(A: np.ndarray, sigma: np.ndarray, pivots: np.ndarray, dt: float, visit: Callable):
    """Propagate Z_j = D_{p_j} X for all pivots along the path; `visit(i, Z, n_active)` at each node.

    A holds drift Jacobians at nodes 0..n-1, shape (..., n, m, m).
    """
    n = A.shape[-3]
    batch = A.shape[:-3]
    m, d = sigma.shape
    Z = np.zeros(batch + (pivots.shape[0], m, d))
    n_active = 0
    for i in range(n + 1):
        while n_active < pivots.shape[0] and pivots[n_active] == i:
            Z[..., n_active, :, :] = sigma
            n_active += 1
        visit(i, Z, n_active)
        if i < n and n_active:
            Za = Z[..., :n_active, :, :]
            Za -= dt * np.einsum("...ab,...jbc->...jac", A[..., i, :, :], Za)


@dataclass(frozen=True)
class MalliavinGrid:
    """D_s X_t for pivot nodes s and every grid node t >= s (NaN where t < s)."""

    grid: TimeGrid
    pivots: np.ndarray
    D: np.ndarray
    sigma: np.ndarray
    L1: float
    model_name: str = ""

    @property
    def n_pivots(self) -> int:
        return self.pivots.shape[0]

    def norms(self) -> np.ndarray:
        """Hilbert-Schmidt norms |D_s X_t|, shape (n_s, n+1)."""
        return np.sqrt(np.sum(self.D**2, axis=(-2, -1)))

    def decay_envelope(self, slack: bool = True) -> np.ndarray:
        """|sigma| exp(-L1 (t - s)) on the stored entries, optionally times exp(2 dt L1)."""
        t = self.grid.times
        lag = t[None, :] - t[self.pivots][:, None]
        env = np.linalg.norm(self.sigma) * np.exp(-self.L1 * lag)
        if slack:
            env = env * np.exp(2 * self.grid.dt * self.L1)
        return np.where(lag >= 0, env, np.nan)

    def decay_violations(self, slack: bool = True) -> int:
        norms = self.norms()
        env = self.decay_envelope(slack)
        ok = np.isnan(norms) | (norms <= env * (1 + 1e-12))
        return int(np.sum(~ok))


def propagate_derivative(model: DriftModel, path: SolutionPath, n_pivots: Optional[int] = None) -> MalliavinGrid:
    if path.values.ndim != 2:
        raise ValueError("propagate_derivative expects a single path; use skorohod_cells_batch for batches")
    grid = path.grid
    n = grid.n_steps
    pivots = pivot_nodes(n, n_pivots)
    A = model.drift_jacobian(path.values[:-1])
    D = np.full((pivots.shape[0], n + 1, model.m, model.d), np.nan)

    def visit(i, Z, na):
        D[:na, i] = Z[:na]

    with np.errstate(over="ignore", invalid="ignore"):
        _derivative_sweep(A, model.sigma, pivots, grid.dt, visit)
    bad = ~np.isfinite(D) & ~np.isnan(D)
    bad |= np.isnan(D) & (grid.times[None, :, None, None] >= grid.times[pivots][:, None, None, None])
    if bad.any():
        step = int(np.argmax(bad.any(axis=(0, 2, 3))))
        raise FloatingPointError(f"Malliavin derivative blew up at step {step}; dissipativity or dt violated")
    return MalliavinGrid(grid, pivots, D, model.sigma, float(model.L1), model.name)


@dataclass(frozen=True)
class DerivedProcess:
    """Cellwise integrand u_i (value at the left node) with its pivot derivatives.

    u: (n+1, d); Du: (n_s, n+1, d, d) with zeros where s > t;
    Du_diag: (n+1, d, d), the derivative at s = t.
    """

    grid: TimeGrid
    u: np.ndarray
    Du: np.ndarray
    Du_diag: np.ndarray
    pivots: np.ndarray


def derived_process(mg: MalliavinGrid, path: SolutionPath, g: Callable, grad_g: Callable) -> DerivedProcess:
    """u_t = g(X_t) with Du(s, t) = grad g(X_t) D_s X_t; g: (..., m) -> (..., d), grad_g -> (..., d, m)."""
    X = path.values
    G = grad_g(X)
    Du = np.einsum("tcb,jtbe->jtce", G, np.nan_to_num(mg.D))
    Du_diag = G @ mg.sigma
    return DerivedProcess(mg.grid, g(X), Du, Du_diag, mg.pivots)


def brownian_process(noise: FbmPath, n_pivots: Optional[int] = None) -> DerivedProcess:
    """u_t = B_t, whose derivative is the identity for s <= t."""
    n = noise.grid.n_steps
    d = noise.d
    pivots = pivot_nodes(n, n_pivots)
    t_idx = np.arange(n + 1)
    on = (t_idx[None, :] >= pivots[:, None]).astype(float)
    Du = on[:, :, None, None] * np.eye(d)
    Du_diag = np.broadcast_to(np.eye(d), (n + 1, d, d)).copy()
    return DerivedProcess(noise.grid, noise.values.copy(), Du, Du_diag, pivots)


def deterministic_process(grid: TimeGrid, u: np.ndarray) -> DerivedProcess:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] == grid.n_steps:
        u = np.vstack([u, np.zeros((1, u.shape[1]))])
    d = u.shape[1]
    pivots = pivot_nodes(grid.n_steps, 1)
    return DerivedProcess(grid, u, np.zeros((1, grid.n_steps + 1, d, d)), np.zeros((grid.n_steps + 1, d, d)), pivots)


@dataclass
class SkorohodResult:
    value: float
    correction: float
    pathwise_sum: float
    pathwise_cells: np.ndarray
    correction_cells: np.ndarray
    metadata: dict = field(default_factory=dict)

    def running(self, start: int = 0) -> np.ndarray:
        """Integral over [t_start, t_k] for k = start..n; the first entry is 0."""
        c = self.pathwise_cells[start:] - self.correction_cells[start:]
        return np.concatenate([[0.0], np.cumsum(c)])


def _window_indices(grid: TimeGrid, window) -> tuple[int, int]:
    if window is None:
        return 0, grid.n_steps
    a, b = window
    ia, ib = grid.index_of(a), grid.index_of(b)
    if ia > ib:
        raise ValueError("window must satisfy a <= b")
    return ia, ib


def _pivot_metadata(grid: TimeGrid, pivots: np.ndarray, L1: float, tol: float) -> dict:
    gaps = np.diff(np.concatenate([pivots, [grid.n_steps]]))
    spacing = float(np.max(gaps, initial=1) * grid.dt)
    # linear interpolation of an exp(-L1 s) profile: relative error ~ (L1 h)^2 / 8
    est = (L1 * spacing) ** 2 / 8 if np.max(gaps, initial=1) > 1 else 0.0
    meta = {"n_pivots": int(pivots.shape[0]), "pivot_spacing": spacing, "interpolation_error_estimate": est}
    if est > tol:
        meta["warning"] = f"pivot spacing {spacing:.4g} too coarse for tolerance {tol:g}"
    return meta


def _contract(nodes, pivots, row, lag_offset, tr_piv, tr_diag, chunk=1024):
    """Trace contractions at `nodes`; tr_piv (len(nodes), n_s), tr_diag (len(nodes),)."""
    out = np.empty(nodes.shape[0])
    for a in range(0, nodes.shape[0], chunk):
        W, wd = trace_weights(nodes[a : a + chunk], pivots, row, lag_offset)
        out[a : a + chunk] = np.sum(W * tr_piv[a : a + chunk], axis=1) + wd * tr_diag[a : a + chunk]
    return out


def skorohod_integral(
    proc: DerivedProcess,
    noise: FbmPath,
    h: HurstLike,
    window=None,
    cov: Optional[IncrementCovariance] = None,
    rule: str = "trapezoid",
    L1: float = 1.0,
    tol: float = 0.05,
) -> SkorohodResult:
    """Discrete divergence of u 1_[a, b); window endpoints must be grid nodes."""
    _check_rule(rule)
    grid = noise.grid
    if proc.grid != grid:
        raise ValueError("process and noise live on different grids")
    cov = increment_covariance(grid, h) if cov is None else cov
    n = grid.n_steps
    dB = noise.increments
    row = cov.toeplitz_row
    tr_piv = np.trace(proc.Du, axis1=-2, axis2=-1).T  # (n+1, n_s)
    tr_diag = np.trace(proc.Du_diag, axis1=-2, axis2=-1)
    left = _contract(np.arange(n), proc.pivots, row, 1, tr_piv[:n], tr_diag[:n])
    if rule == "left":
        pathwise = np.einsum("ic,ic->i", proc.u[:n], dB)
        corr = left
    else:
        pathwise = np.einsum("ic,ic->i", 0.5 * (proc.u[:n] + proc.u[1:]), dB)
        right = _contract(np.arange(1, n + 1), proc.pivots, row, 0, tr_piv[1:], tr_diag[1:])
        corr = 0.5 * (left + right)
    ia, ib = _window_indices(grid, window)
    ps = float(np.sum(pathwise[ia:ib]))
    cs = float(np.sum(corr[ia:ib]))
    meta = _pivot_metadata(grid, proc.pivots, L1, tol)
    meta.update({"window": [ia, ib], "h": float(cov.h), "rule": rule})
    return SkorohodResult(ps - cs, cs, ps, pathwise, corr, meta)


def skorohod_cells_batch(
    model: DriftModel,
    X: np.ndarray,
    dB: np.ndarray,
    cov: IncrementCovariance,
    pivots: np.ndarray,
    g: Optional[Callable] = None,
    grad_g: Optional[Callable] = None,
    rule: str = "trapezoid",
    chunk: int = 256,
):
    """Per-cell pathwise terms and trace corrections for u = g(X), without storing D.

    X: (R, n+1, m) Euler paths driven by dB: (R, n, d). g maps (..., m) to
    (..., k, d) and grad_g to (..., k, d, m); both default to g_j = f_j^T sigma.
    Returns (pathwise, correction), each of shape (R, k, n).
    """
    _check_rule(rule)
    g = model.g if g is None else g
    grad_g = model.grad_g if grad_g is None else grad_g
    n = X.shape[1] - 1
    trap = rule == "trapezoid"
    U = g(X)
    cell_u = 0.5 * (U[:, :n] + U[:, 1:]) if trap else U[:, :n]
    pathwise = np.einsum("rikc,ric->rki", cell_u, dB)
    G = grad_g(X)  # (R, n+1, k, d, m)
    A = model.drift_jacobian(X[:, :n])
    tr_diag = np.einsum("rikcb,bc->rki", G, model.sigma)
    corr = np.zeros_like(pathwise)
    row = cov.toeplitz_row
    half = 0.5 if trap else 1.0
    cache = {}

    def weights(i, off):
        base = (i // chunk) * chunk
        key = (base, off)
        if key not in cache:
            if len(cache) > 2:
                cache.clear()
            cache[key] = trace_weights(np.arange(base, min(base + chunk, n + 1)), pivots, row, off)
        W, wd = cache[key]
        return W[i - base], wd[i - base]

    def contract(i, off, Z, na):
        W, wd = weights(i, off)
        c = wd * tr_diag[:, :, i]
        if na:
            tr = np.einsum("rkcb,rjbc->rkj", G[:, i], Z[:, :na])
            c = c + tr @ W[:na]
        return c

    def visit(i, Z, na):
        if i < n:
            corr[:, :, i] += half * contract(i, 1, Z, na)
        if trap and i >= 1:
            corr[:, :, i - 1] += 0.5 * contract(i, 0, Z, na)

    with np.errstate(over="ignore", invalid="ignore"):
        _derivative_sweep(A, model.sigma, pivots, cov.dt, visit)
    if not np.all(np.isfinite(corr)):
        raise FloatingPointError("non-finite trace correction; the derivative sweep blew up")
    return pathwise, corr


@dataclass
class DerivativeIncrementReport:
    max_ratio_u: float  # |D_u X_t - D_v X_t| against e^{-L1(t-u)} (1 ^ |u-v|)
    max_ratio_t: float  # |D_u X_t - D_u X_s| against e^{-L1(s-u)} (1 ^ |t-s|)
    max_ratio_double: float
    t_lipschitz_slope: float
    n_comparisons: int
    ratio_cap: float
    p: float

    @property
    def bounded(self) -> dict:
        return {
            k: bool(np.isfinite(v) and v <= self.ratio_cap)
            for k, v in (("u", self.max_ratio_u), ("t", self.max_ratio_t), ("double", self.max_ratio_double))
        }


def derivative_increments_check(
    grids,
    p: float = 2.0,
    max_pivots: int = 10,
    max_times: int = 24,
    ratio_cap: float = 50.0,
) -> DerivativeIncrementReport:
    """Monte Carlo L^p norms of derivative increments against their exponential envelopes.

    `grids` is one MalliavinGrid or a sequence sharing pivots and grid.
    """
    if isinstance(grids, MalliavinGrid):
        grids = [grids]
    g0 = grids[0]
    t = g0.grid.times
    L1 = g0.L1
    jp = np.unique(np.linspace(0, g0.n_pivots - 1, min(max_pivots, g0.n_pivots)).round().astype(int))
    ti = np.unique(np.linspace(0, g0.grid.n_steps, min(max_times, g0.grid.n_steps + 1)).round().astype(int))
    D = np.stack([gr.D[jp][:, ti] for gr in grids])  # (R, J, T, m, d)
    sp = t[g0.pivots[jp]]
    tt = t[ti]

    def lp(x):
        return np.mean(np.sqrt(np.sum(x**2, axis=(-2, -1))) ** p, axis=0) ** (1 / p)

    # (u, v) pairs over pivots, t over times; v < u <= t
    du = lp(D[:, :, None] - D[:, None, :])  # (J_u, J_v, T)
    U, V, TT = np.meshgrid(sp, sp, tt, indexing="ij")
    ok = (V < U) & (U <= TT)
    env = np.exp(-L1 * (TT - U)) * np.minimum(1.0, U - V)
    r_u = np.max(du[ok] / env[ok], initial=0.0)

    # (s, t) pairs over times for fixed u; u <= s < t
    dtt = lp(D[:, :, :, None] - D[:, :, None, :])  # (J, T_t, T_s)
    U2, T2, S2 = np.meshgrid(sp, tt, tt, indexing="ij")
    ok2 = (U2 <= S2) & (S2 < T2)
    env2 = np.exp(-L1 * (S2 - U2)) * np.minimum(1.0, T2 - S2)
    r_t = np.max(dtt[ok2] / env2[ok2], initial=0.0)

    # double differences: v < u <= s < t
    dd = D[:, :, None] - D[:, None, :]  # (R, J_u, J_v, T)
    ddd = lp(dd[:, :, :, :, None] - dd[:, :, :, None, :])  # (J_u, J_v, T_t, T_s)
    U3, V3, T3, S3 = np.meshgrid(sp, sp, tt, tt, indexing="ij")
    ok3 = (V3 < U3) & (U3 <= S3) & (S3 < T3)
    env3 = np.exp(-L1 * (S3 - U3)) * np.minimum(1.0, U3 - V3) * np.minimum(1.0, T3 - S3)
    r_d = np.max(ddd[ok3] / env3[ok3], initial=0.0)

    slope = _t_lipschitz_slope(grids, p)
    return DerivativeIncrementReport(
        float(r_u), float(r_t), float(r_d), slope, int(ok.sum() + ok2.sum() + ok3.sum()), ratio_cap, p
    )


def _t_lipschitz_slope(grids: Sequence[MalliavinGrid], p: float, max_decay: float = 0.25) -> float:
    """Log-log slope of ||D_u X_{s+lag} - D_u X_s||_p against lag, first pivot, dyadic lags.

    Lags stop at L1 * lag = max_decay: beyond that the exponential envelope
    saturates the difference and the slope drops below the Lipschitz order.
    """
    g0 = grids[0]
    n = g0.grid.n_steps
    u = int(g0.pivots[0])
    s = u + max(1, (n - u) // 4)
    lags = 2 ** np.arange(0, 16)
    lags = lags[(s + lags <= n) & (lags * g0.grid.dt * max(g0.L1, 1e-12) <= max_decay)]
    if lags.shape[0] < 3:
        return float("nan")
    vals = []
    for lag in lags:
        diff = np.stack([gr.D[0, s + lag] - gr.D[0, s] for gr in grids])
        vals.append(np.mean(np.sqrt(np.sum(diff**2, axis=(-2, -1))) ** p) ** (1 / p))
    x = np.log(lags * g0.grid.dt)
    return float(np.polyfit(x, np.log(vals), 1)[0])


# ---------------------------------------------------------------------------
# Scalar test functions and the duality registry
# ---------------------------------------------------------------------------

G_FUNCTIONS = {
    "identity": (lambda x: x, lambda x: np.ones_like(x)[..., None]),
    "tanh": (np.tanh, lambda x: (1.0 / np.cosh(x) ** 2)[..., None]),
    "sin": (np.sin, lambda x: np.cos(x)[..., None]),
    "square": (lambda x: x**2, lambda x: (2.0 * x)[..., None]),
    "one": (lambda x: np.ones_like(x), lambda x: np.zeros_like(x)[..., None]),
}
"""Scalar-to-scalar g (m = d = 1) as (g, grad g); grad g has shape (..., 1, 1)."""


def _g_as_process(name):
    g, dg = G_FUNCTIONS[name]
    return (lambda x: g(x)[..., None, :], lambda x: dg(x)[..., None, :, :])


@dataclass
class DualityReport:
    pair: str
    lhs_mean: float
    rhs_mean: float
    lhs_se: float
    rhs_se: float
    n_paths: int

    @property
    def pooled_se(self) -> float:
        return float(np.hypot(self.lhs_se, self.rhs_se))

    @property
    def gap(self) -> float:
        """|E[F delta(u)] - E<DF, u>| in units of the pooled standard error."""
        return abs(self.lhs_mean - self.rhs_mean) / self.pooled_se if self.pooled_se > 0 else 0.0


def _cell_values(u: np.ndarray, rule: str) -> np.ndarray:
    """Node values (..., n+1) to cell values (..., n) under a quadrature rule."""
    return 0.5 * (u[..., :-1] + u[..., 1:]) if rule == "trapezoid" else u[..., :-1]


def _divergence_of_g(B, cov, pivots, rule, theta, g_name):
    """Cell values of u = g(X) and delta(u) for the scalar fOU X driven by B."""
    model = linear_model(theta, 1.0)
    dB = np.diff(B, axis=1)
    X = euler_paths(model, dB, 0.0, cov.dt)
    g, dg = _g_as_process(g_name)
    pw, corr = skorohod_cells_batch(model, X, dB, cov, pivots, g, dg, rule=rule)
    return _cell_values(g(X)[..., 0, 0], rule), (pw - corr)[:, 0].sum(axis=1)


def _pair_one_tanh(B, cov, pivots, rule):
    _, delta = _divergence_of_g(B, cov, pivots, rule, 1.0, "tanh")
    return delta, np.zeros_like(delta)


def _pair_bt_deterministic(B, cov, pivots, rule):
    n = cov.n
    u = _cell_values(1.0 + np.cos(2 * np.pi * np.arange(n + 1) / n), rule)
    delta = np.diff(B, axis=1)[..., 0] @ u
    rhs = float(np.sum(cov.matvec(np.ones(n)) * u))
    return B[:, -1, 0] * delta, np.full(B.shape[0], rhs)


def _pair_bt2_b(B, cov, pivots, rule):
    # theta = 0 makes the Euler solution B itself
    u, delta = _divergence_of_g(B, cov, pivots, rule, 0.0, "identity")
    # DF = 2 B_T 1_[0,T]
    rhs = 2 * B[:, -1, 0] * (u @ cov.matvec(np.ones(cov.n)))
    return B[:, -1, 0] ** 2 * delta, rhs


def _pair_sin_mid_tanh(B, cov, pivots, rule):
    n = cov.n
    half = n // 2
    u, delta = _divergence_of_g(B, cov, pivots, rule, 1.0, "tanh")
    ind = np.zeros(n)
    ind[:half] = 1.0
    F = np.sin(B[:, half, 0])
    rhs = np.cos(B[:, half, 0]) * (u @ cov.matvec(ind))
    return F * delta, rhs


DUALITY_PAIRS = {
    "one_tanhX": _pair_one_tanh,
    "BT_deterministic": _pair_bt_deterministic,
    "BT2_B": _pair_bt2_b,
    "sinBmid_tanhX": _pair_sin_mid_tanh,
}
"""(F, u) pairs: F = 1 with u = tanh(X); F = B_T with deterministic u;
F = B_T^2 with u = B; F = sin(B_{T/2}) with u = tanh(X). X is the fOU with theta = sigma = 1."""


def duality_check(
    pair: str,
    h: HurstLike,
    n_paths: int = 10_000,
    n_steps: int = 256,
    T: float = 1.0,
    seed: int = 0,
    n_pivots: Optional[int] = None,
    rule: str = "trapezoid",
    batch: int = 2000,
) -> DualityReport:
    """Compare MC means of F delta(u) and <DF, u> for a registry pair."""
    _check_rule(rule)
    try:
        fn = DUALITY_PAIRS[pair]
    except KeyError:
        raise ValueError(f"unknown duality pair {pair!r}; registry has {sorted(DUALITY_PAIRS)}") from None
    grid = TimeGrid.from_horizon(T, n_steps)
    cov = increment_covariance(grid, h)
    pivots = pivot_nodes(n_steps, n_pivots)
    lhs, rhs = [], []
    for start in range(0, n_paths, batch):
        size = min(batch, n_paths - start)
        B = sample_fbm_batch(grid, h, 1, seed, size, start_index=start)
        a, b = fn(B, cov, pivots, rule)
        lhs.append(a)
        rhs.append(b)
    lhs = np.concatenate(lhs)
    rhs = np.concatenate(rhs)
    se = lambda x: float(np.std(x, ddof=1) / np.sqrt(x.shape[0]))  # noqa: E731
    return DualityReport(pair, float(lhs.mean()), float(rhs.mean()), se(lhs), se(rhs), n_paths)

