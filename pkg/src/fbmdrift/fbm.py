"""Exact-covariance sampling of fractional Brownian motion on uniform grids."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import linalg

__all__ = [
    "Regime",
    "HurstParameter",
    "TimeGrid",
    "IncrementCovariance",
    "FbmPath",
    "EmbeddingError",
    "as_hurst",
    "path_rng",
    "covariance",
    "increment_covariance",
    "circulant_eigenvalues",
    "sample_fbm",
    "sample_fbm_batch",
    "increments_from_core",
]

METHODS = ("circulant", "cholesky", "auto")


class Regime(str, enum.Enum):
    ROUGH = "rough"
    BROWNIAN = "brownian"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class HurstParameter:
    """Hurst index in (0, 1) with its regularity regime.

    Covariance primitives accept any h in (0, 1); `for_estimation` enforces
    the (1/4, 1) range on which the drift estimator is consistent.
    """

    h: float

    def __post_init__(self):
        h = float(self.h)
        if not 0.0 < h < 1.0:
            raise ValueError(f"Hurst parameter must lie in (0, 1), got {h}")
        object.__setattr__(self, "h", h)

    @classmethod
    def for_estimation(cls, h: float) -> "HurstParameter":
        if not 0.25 < float(h) < 1.0:
            raise ValueError(f"estimation requires H in (1/4, 1), got {h}")
        return cls(h)

    @property
    def regime(self) -> Regime:
        if self.h < 0.5:
            return Regime.ROUGH
        if self.h > 0.5:
            return Regime.SMOOTH
        return Regime.BROWNIAN

    def __float__(self) -> float:
        return self.h


HurstLike = Union[float, HurstParameter]


def as_hurst(h: HurstLike) -> HurstParameter:
    return h if isinstance(h, HurstParameter) else HurstParameter(h)


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    dt: float

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be a positive integer")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_horizon(cls, T: float, n_steps: int) -> "TimeGrid":
        return cls(n_steps, T / n_steps)

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Grid index of time `t`; raises if `t` is not (numerically) a node."""
        k = int(round(t / self.dt))
        if not 0 <= k <= self.n_steps or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a node of {self}")
        return k


def covariance(s, t, h: HurstLike):
    """R_H(s, t) = (|s|^2H + |t|^2H - |t - s|^2H) / 2, vectorised."""
    H2 = 2.0 * as_hurst(h).h
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("covariance is defined for nonnegative times")
    out = 0.5 * (np.abs(t) ** H2 + np.abs(s) ** H2 - np.abs(t - s) ** H2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IncrementCovariance:
    """Covariance of the increments of one fBm component on a uniform grid.

    Only the first Toeplitz row is stored; `gamma` materialises the n x n matrix.
    """

    toeplitz_row: np.ndarray
    dt: float
    h: float

    @property
    def n(self) -> int:
        return self.toeplitz_row.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        return linalg.toeplitz(self.toeplitz_row)

    def lag(self, k) -> np.ndarray:
        return self.toeplitz_row[np.abs(np.asarray(k))]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Gamma @ x along the first axis without forming Gamma."""
        if self.n <= 256:
            return self.gamma @ x
        return linalg.matmul_toeplitz(self.toeplitz_row, x)


def _increment_row(n: int, dt: float, h: float) -> np.ndarray:
    k = np.arange(n, dtype=float)
    H2 = 2.0 * h
    return 0.5 * dt**H2 * (np.abs(k + 1) ** H2 - 2.0 * k**H2 + np.abs(k - 1) ** H2)


def increment_covariance(grid: TimeGrid, h: HurstLike) -> IncrementCovariance:
    hp = as_hurst(h)
    return IncrementCovariance(_increment_row(grid.n_steps, grid.dt, hp.h), grid.dt, hp.h)


class EmbeddingError(RuntimeError):
    pass


def circulant_eigenvalues(cov: IncrementCovariance) -> np.ndarray:
    """Eigenvalues of the 2n circulant matrix embedding the increment covariance."""
    row = cov.toeplitz_row
    n = row.shape[0]
    extra = _increment_row(n + 1, cov.dt, cov.h)[n]
    c = np.concatenate([row, [extra], row[:0:-1]])
    return np.fft.fft(c).real


@dataclass(frozen=True)
class FbmPath:
    """One d-dimensional fBm sample; `values[k]` is B at grid node k."""

    grid: TimeGrid
    h: float
    values: np.ndarray
    seed: int
    path_index: int = 0
    method: str = "circulant"
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (master seed, path index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(path_index)])))


class _Sampler:
    """Precomputed factorisation shared by every path of a batch."""

    def __init__(self, grid: TimeGrid, h: HurstLike, method: str, allow_fallback: bool):
        if method not in METHODS:
            raise ValueError(f"unknown sampling method {method!r}; expected one of {METHODS}")
        self.cov = increment_covariance(grid, h)
        self.n = grid.n_steps
        self.method = "cholesky" if method == "cholesky" else "circulant"
        self.sqrt_eig = None
        self.chol = None
        if self.method == "circulant":
            lam = circulant_eigenvalues(self.cov)
            tol = 1e-10 * np.max(np.abs(lam))
            if lam.min() < -tol:
                if not (allow_fallback or method == "auto"):
                    raise EmbeddingError(
                        f"circulant embedding is not nonnegative definite: "
                        f"most negative eigenvalue {lam.min():.6e}"
                    )
                self.method = "cholesky"
            else:
                self.sqrt_eig = np.sqrt(np.clip(lam, 0.0, None) / lam.shape[0])
        if self.method == "cholesky":
            self.chol = linalg.cholesky(self.cov.gamma, lower=True)

    def core_shape(self, d: int) -> tuple:
        if self.method == "circulant":
            return (d, 2, 2 * self.n)
        return (d, self.n)

    def transform(self, core: np.ndarray) -> np.ndarray:
        """Map standard normal cores (..., *core_shape) to increments (..., n, d)."""
        if self.method == "circulant":
            z = core[..., 0, :] + 1j * core[..., 1, :]
            y = np.fft.fft(self.sqrt_eig * z, axis=-1).real[..., : self.n]
        else:
            y = core @ self.chol.T
        return np.swapaxes(y, -1, -2)


def increments_from_core(grid: TimeGrid, h: HurstLike, core: np.ndarray, method: str = "cholesky") -> np.ndarray:
    """Deterministic part of the sampler: Gaussian core -> increments of shape (..., n, d).

    Feeding unit vectors as the core exposes the Cholesky factor column by column.
    """
    return _Sampler(grid, h, method, allow_fallback=False).transform(np.asarray(core, dtype=float))


def sample_fbm_batch(
    grid: TimeGrid,
    h: HurstLike,
    d: int = 1,
    seed: int = 0,
    n_paths: int = 1,
    method: str = "auto",
    start_index: int = 0,
    allow_fallback: bool = True,
) -> np.ndarray:
    """Sample paths `start_index, ..., start_index + n_paths - 1`; shape (n_paths, n+1, d).

    Path k depends only on (seed, k), so batches can be split across workers freely.
    """
    sampler = _Sampler(grid, h, method, allow_fallback)
    shape = sampler.core_shape(d)
    core = np.empty((n_paths,) + shape)
    for r in range(n_paths):
        core[r] = path_rng(seed, start_index + r).standard_normal(shape)
    out = np.zeros((n_paths, grid.n_steps + 1, d))
    np.cumsum(sampler.transform(core), axis=1, out=out[:, 1:, :])
    return out


def sample_fbm(
    grid: TimeGrid,
    h: HurstLike,
    d: int = 1,
    seed: int = 0,
    method: str = "auto",
    path_index: int = 0,
    allow_fallback: bool = True,
) -> FbmPath:
    sampler = _Sampler(grid, h, method, allow_fallback)
    core = path_rng(seed, path_index).standard_normal(sampler.core_shape(d))
    values = np.zeros((grid.n_steps + 1, d))
    np.cumsum(sampler.transform(core), axis=0, out=values[1:])
    return FbmPath(grid, as_hurst(h).h, values, int(seed), int(path_index), sampler.method)
