"""Multivariate-normal probability machinery.

Rectangle probabilities P(lower < X <= upper) for MVN laws in dimension
1..6 are computed with the sequential-conditioning transform (Genz),
with variables reordered greedily by shortest expected conditional
interval, integrated over randomized (Owen-scrambled) Sobol points.
Everything is deterministic for a fixed :class:`QmcSettings`.

The same low-discrepancy substrate is exposed as
:func:`qmc_normal_stream` so that step-wise rejection procedures can be
evaluated pointwise on correlated normal draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from armdesign.errors import DomainError, MatrixError, NumericError, UnsupportedConfigError

MAX_DIM = 6
_PSD_TOL = 1e-10
_EIG_FLOOR = 1e-12
_U_CLIP = 1e-15

__all__ = [
    "MAX_DIM",
    "CorrMatrix",
    "QmcSettings",
    "MvnEstimate",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "mvn_rectangle",
    "equicoordinate_quantile",
    "qmc_normal_stream",
]


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF with absolute error below 1e-12."""
    if not np.isfinite(x):
        raise DomainError(f"std_normal_cdf requires finite x, got {x!r}")
    return float(ndtr(x))


def std_normal_pdf(x: float) -> float:
    return float(np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi))


def std_normal_quantile(p: float) -> float:
    """Inverse standard normal CDF; ``p`` must lie strictly in (0, 1)."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"std_normal_quantile requires p in (0,1), got {p!r}")
    return float(ndtri(p))


@dataclass(frozen=True)
class QmcSettings:
    """Precision controls for QMC integration.

    ``points_log2`` is the log2 number of points per randomization;
    ``randomizations`` independent scramblings feed the error estimate.
    """

    points_log2: int = 16
    randomizations: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if not (10 <= self.points_log2 <= 24):
            raise DomainError(f"points_log2 must be in [10, 24], got {self.points_log2}")
        if self.randomizations < 1:
            raise DomainError(f"randomizations must be >= 1, got {self.randomizations}")


@dataclass(frozen=True)
class CorrMatrix:
    """Validated correlation matrix of dimension 1..6.

    Symmetric with unit diagonal, off-diagonals in [-1, 1], and smallest
    eigenvalue >= -1e-10.  Semi-definite inputs (e.g. correlations in a
    rho -> 1 limit) are accepted and regularized at factorization time.
    """

    values: np.ndarray = field(repr=False)
    dim: int = 0

    def __post_init__(self) -> None:
        m = np.asarray(self.values, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MatrixError(f"correlation matrix must be square, got shape {m.shape}")
        n = m.shape[0]
        if not (1 <= n <= MAX_DIM):
            raise UnsupportedConfigError(
                f"correlation dimension {n} outside supported range 1..{MAX_DIM}"
            )
        if not np.all(np.isfinite(m)):
            raise MatrixError("correlation matrix has non-finite entries")
        if not np.allclose(m, m.T, atol=1e-12):
            raise MatrixError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise MatrixError("correlation matrix diagonal must be 1")
        if np.any(np.abs(m) > 1.0 + 1e-12):
            raise MatrixError("correlation entries must lie in [-1, 1]")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -_PSD_TOL:
            raise MatrixError(
                f"correlation matrix is not positive semi-definite "
                f"(smallest eigenvalue {lam_min:.3e})"
            )
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "values", m)
        object.__setattr__(self, "dim", n)

    @classmethod
    def from_array(cls, values) -> "CorrMatrix":
        return cls(values=np.array(values, dtype=float))

    @classmethod
    def identity(cls, dim: int) -> "CorrMatrix":
        return cls(values=np.eye(dim))

    @classmethod
    def exchangeable(cls, dim: int, rho: float) -> "CorrMatrix":
        m = np.full((dim, dim), float(rho))
        np.fill_diagonal(m, 1.0)
        return cls(values=m)

    def is_exchangeable(self, tol: float = 1e-10) -> bool:
        if self.dim == 1:
            return True
        off = self.values[~np.eye(self.dim, dtype=bool)]
        return bool(np.ptp(off) <= tol)

    def permuted(self, order) -> "CorrMatrix":
        idx = np.asarray(order, dtype=int)
        return CorrMatrix(values=self.values[np.ix_(idx, idx)])


@dataclass(frozen=True)
class MvnEstimate:
    value: float
    error_estimate: float


def _factor_pd(corr: CorrMatrix) -> np.ndarray:
    """Lower-triangular-ish factor A with A A^T = corr (eigen-clamped if needed)."""
    m = corr.values
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(m)
        w = np.maximum(w, 0.0)
        return v * np.sqrt(w)


def _regularized(corr: CorrMatrix) -> np.ndarray:
    """Positive-definite version of corr for sequential conditioning.

    Eigenvalues are floored at a small positive value and the diagonal
    renormalized to 1; the perturbation is far below integration accuracy.
    """
    m = corr.values
    w = np.linalg.eigvalsh(m)
    if w[0] > 1e-8:
        return m
    w, v = np.linalg.eigh(m)
    w = np.maximum(w, _EIG_FLOOR)
    m2 = (v * w) @ v.T
    d = np.sqrt(np.diag(m2))
    m2 = m2 / np.outer(d, d)
    return 0.5 * (m2 + m2.T)


@lru_cache(maxsize=6)
def _uniform_block(dim: int, points_log2: int, randomizations: int, seed: int) -> np.ndarray:
    """Scrambled-Sobol block of shape (R, 2^m, dim); read-only and cached."""
    n = 1 << points_log2
    out = np.empty((randomizations, n, dim))
    children = np.random.SeedSequence(entropy=(seed, 0x51B0)).spawn(randomizations)
    for r, child in enumerate(children):
        engine = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(child))
        out[r] = engine.random_base2(points_log2)
    out.setflags(write=False)
    return out


def _reordered_cholesky(cov: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    """Cholesky factor with greedy variable reordering.

    At each step the remaining variable with the smallest expected
    conditional interval probability is pivoted next, which concentrates
    the hardest coordinates early in the sequential conditioning.
    Returns (L, a, b) in the pivoted order.
    """
    n = cov.shape[0]
    c = cov.copy()
    a = lower.copy()
    b = upper.copy()
    big_l = np.zeros((n, n))
    y = np.zeros(n)
    tiny = 1e-14
    for i in range(n):
        best_j, best_p = i, np.inf
        for j in range(i, n):
            djj = c[j, j] - big_l[j, :i] @ big_l[j, :i]
            sd = np.sqrt(max(djj, tiny))
            s = big_l[j, :i] @ y[:i]
            pj = ndtr((b[j] - s) / sd) - ndtr((a[j] - s) / sd)
            if pj < best_p:
                best_p, best_j = pj, j
        if best_j != i:
            for arr in (a, b, y):
                arr[[i, best_j]] = arr[[best_j, i]]
            c[[i, best_j], :] = c[[best_j, i], :]
            c[:, [i, best_j]] = c[:, [best_j, i]]
            big_l[[i, best_j], :] = big_l[[best_j, i], :]
        dii = c[i, i] - big_l[i, :i] @ big_l[i, :i]
        lii = np.sqrt(max(dii, tiny))
        big_l[i, i] = lii
        for j in range(i + 1, n):
            big_l[j, i] = (c[j, i] - big_l[j, :i] @ big_l[i, :i]) / lii
        s = big_l[i, :i] @ y[:i]
        ai = (a[i] - s) / lii
        bi = (b[i] - s) / lii
        pi = ndtr(bi) - ndtr(ai)
        if pi > tiny:
            y[i] = (std_normal_pdf(ai) - std_normal_pdf(bi)) / pi
        else:
            edge = ai if np.isfinite(ai) else bi
            y[i] = float(np.clip(edge if np.isfinite(edge) else 0.0, -10.0, 10.0))
    return big_l, a, b


def _genz_factors(big_l: np.ndarray, a: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-point integrand values of the sequential-conditioning transform.

    ``u`` has shape (N, n-1); returns the N products of conditional
    interval probabilities whose mean estimates the rectangle probability.
    """
    n = big_l.shape[0]
    sd0 = big_l[0, 0]
    with np.errstate(invalid="ignore"):
        d = float(ndtr(a[0] / sd0))
        e = float(ndtr(b[0] / sd0))
    npts = u.shape[0]
    f = np.full(npts, max(e - d, 0.0))
    if n == 1:
        return f
    y = np.empty((npts, n - 1))
    dv = np.full(npts, d)
    ev = np.full(npts, e)
    for i in range(1, n):
        z = dv + u[:, i - 1] * (ev - dv)
        y[:, i - 1] = ndtri(np.clip(z, _U_CLIP, 1.0 - _U_CLIP))
        s = y[:, :i] @ big_l[i, :i]
        with np.errstate(invalid="ignore"):
            dv = ndtr((a[i] - s) / big_l[i, i])
            ev = ndtr((b[i] - s) / big_l[i, i])
        f *= np.clip(ev - dv, 0.0, 1.0)
    return f


def _validate_bounds(lower, upper, mean, corr: CorrMatrix):
    n = corr.dim
    a = np.asarray(lower, dtype=float).reshape(-1)
    b = np.asarray(upper, dtype=float).reshape(-1)
    mu = np.asarray(mean, dtype=float).reshape(-1)
    if not (len(a) == len(b) == len(mu) == n):
        raise DomainError(
            f"bounds/mean length must equal corr dimension {n}, "
            f"got {len(a)}/{len(b)}/{len(mu)}"
        )
    if np.any(np.isnan(a)) or np.any(np.isnan(b)) or not np.all(np.isfinite(mu)):
        raise DomainError("bounds must be non-NaN and mean finite")
    if np.any(a > b):
        raise DomainError("lower bound exceeds upper bound")
    return a, b, mu


def mvn_rectangle(lower, upper, mean, corr: CorrMatrix, settings: QmcSettings | None = None) -> MvnEstimate:
    """Randomized-QMC estimate of P(lower < X <= upper) for X ~ MVN(mean, corr).

    Infinite bounds are allowed.  The reported error estimate is three
    times the standard error across scrambling randomizations (zero in
    dimension 1, where the value is closed-form).
    """
    settings = settings or QmcSettings()
    a, b, mu = _validate_bounds(lower, upper, mean, corr)
    a = a - mu
    b = b - mu
    if corr.dim == 1:
        with np.errstate(invalid="ignore"):
            value = float(ndtr(b[0]) - ndtr(a[0]))
        return MvnEstimate(value=max(value, 0.0), error_estimate=0.0)
    cov = _regularized(corr)
    big_l, a_p, b_p = _reordered_cholesky(cov, a, b)
    u = _uniform_block(corr.dim - 1, settings.points_log2, settings.randomizations, settings.seed)
    estimates = np.array([_genz_factors(big_l, a_p, b_p, u[r]).mean() for r in range(u.shape[0])])
    value = float(np.clip(estimates.mean(), 0.0, 1.0))
    if len(estimates) > 1:
        err = 3.0 * float(estimates.std(ddof=1)) / np.sqrt(len(estimates))
    else:
        err = float("nan")
    return MvnEstimate(value=value, error_estimate=err)


def equicoordinate_quantile(alpha: float, corr: CorrMatrix, settings: QmcSettings | None = None) -> float:
    """Common threshold c with 1 - P(all X_k <= c) = alpha under MVN(0, corr).

    Solved by bracketed root finding on :func:`mvn_rectangle`; the
    bracket [z_{1-alpha}, z_{1-alpha/K}] is valid for any correlation.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0,1), got {alpha!r}")
    settings = settings or QmcSettings()
    k = corr.dim
    if k == 1:
        return std_normal_quantile(1.0 - alpha)
    lo = std_normal_quantile(1.0 - alpha) - 1e-3
    hi = std_normal_quantile(1.0 - alpha / k) + 1e-3
    neg_inf = np.full(k, -np.inf)
    zero = np.zeros(k)

    def excess(c: float) -> float:
        hit = mvn_rectangle(neg_inf, np.full(k, c), zero, corr, settings)
        return (1.0 - hit.value) - alpha

    f_lo, f_hi = excess(lo), excess(hi)
    if not (f_lo >= 0.0 >= f_hi):
        lo -= 0.5
        hi += 0.5
        f_lo, f_hi = excess(lo), excess(hi)
        if not (f_lo >= 0.0 >= f_hi):
            raise NumericError(
                f"failed to bracket equicoordinate quantile at alpha={alpha}"
            )
    return float(brentq(excess, lo, hi, xtol=1e-10))


def qmc_normal_stream(dim: int, settings: QmcSettings, corr: CorrMatrix, mean) -> np.ndarray:
    """Deterministic correlated-normal point block, shape (R, 2^m, dim).

    Built from the scrambled-Sobol substrate via the inverse normal CDF
    and a Cholesky (or eigen, for semi-definite corr) factor; identical
    inputs give identical output.
    """
    if dim != corr.dim:
        raise DomainError(f"dim {dim} does not match corr dimension {corr.dim}")
    mu = np.asarray(mean, dtype=float).reshape(-1)
    if len(mu) != dim or not np.all(np.isfinite(mu)):
        raise DomainError("mean must be finite with length equal to dim")
    z = _std_normal_block(dim, settings.points_log2, settings.randomizations, settings.seed)
    factor = _factor_pd(corr)
    return z @ factor.T + mu


@lru_cache(maxsize=6)
def _std_normal_block(dim: int, points_log2: int, randomizations: int, seed: int) -> np.ndarray:
    u = _uniform_block(dim, points_log2, randomizations, seed)
    z = ndtri(np.clip(u, _U_CLIP, 1.0 - _U_CLIP))
    z.setflags(write=False)
    return z
