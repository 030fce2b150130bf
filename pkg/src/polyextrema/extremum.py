"""Extremum Sobol' indices.

Monte Carlo filtering isolates the inputs behind the largest (top) or
smallest (bottom) outputs.  The retained points are summarized by kernel
density marginals and a correlation matrix, re-sampled through a Gaussian
copula, and a polynomial basis is orthonormalized against them by QR.
Indices then follow from the covariance decomposition of the fitted
polynomial.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.interpolate import PchipInterpolator
from scipy.signal import fftconvolve
from scipy.special import ndtr

from .errors import ConfigError, NumericalError, RankDeficientError, UnderdeterminedError
from .orthobasis import Uniform, design_matrix, index_set, sample_inputs
from .pce import SampleSet, SensitivityReport, Surrogate, evaluate

DEFAULT_FRACTION = 0.05
DEFAULT_POOL_SIZE = 100_000
EIGEN_FLOOR = 1e-10
INVERSE_TOL = 1e-10


class Tail(str, enum.Enum):
    TOP = "top"
    BOTTOM = "bottom"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"tail must be 'top' or 'bottom', got {value!r}") from None


# ---------------------------------------------------------------------------
# Monte Carlo filtering


def mcf_filter(X, y, fraction=DEFAULT_FRACTION, tail=Tail.TOP, return_outputs=False):
    """Rows of X whose outputs lie in the top or bottom ``fraction`` of y.

    All rows tied with the cutoff value are kept, so the count can exceed
    ceil(fraction * N) by the number of ties.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    tail = Tail.parse(tail)
    N, d = X.shape
    if y.shape[0] != N:
        raise ConfigError("inputs and outputs have different lengths")
    if not 0.0 < fraction < 0.5:
        raise ConfigError(f"fraction must lie in (0, 0.5), got {fraction}")
    keep = math.ceil(fraction * N)
    if N * fraction < 10 * d:
        raise ConfigError(f"too few retained samples: {N} x {fraction} < 10 d = {10 * d}")
    order = np.sort(y)
    if tail is Tail.TOP:
        mask = y >= order[N - keep]
    else:
        mask = y <= order[keep - 1]
    if return_outputs:
        return X[mask], y[mask]
    return X[mask]


# ---------------------------------------------------------------------------
# Marginals


def silverman_bandwidth(x):
    """h = 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to sd when IQR is 0."""
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** (-0.2)


class KernelMarginal:
    """Gaussian-kernel density restricted to ``[lower, upper]``.

    With ``boundary="reflect"`` (default) the data are mirrored at each
    finite bound, which removes the first-order density deficit at the
    edges; ``"truncate"`` cuts the kernel sum and renormalizes.  The CDF is
    tabulated on a grid and interpolated with a monotone cubic (PCHIP); the
    inverse CDF is solved by safeguarded Newton.
    """

    def __init__(self, data, lower=-np.inf, upper=np.inf, bandwidth=None, cells_per_bandwidth=40,
                 max_grid=1 << 16, boundary="reflect"):
        self.data = np.sort(np.asarray(data, dtype=float).ravel())
        if self.data.size < 2:
            raise ConfigError("a kernel density needs at least two samples")
        if boundary not in ("reflect", "truncate"):
            raise ConfigError("boundary must be 'reflect' or 'truncate'")
        self.lower, self.upper = float(lower), float(upper)
        if self.data[0] < self.lower or self.data[-1] > self.upper:
            raise ConfigError("kernel data lie outside the stated support")
        h = silverman_bandwidth(self.data) if bandwidth is None else float(bandwidth)
        self.degenerate = not h > 0.0
        self.bandwidth = h
        self.boundary = boundary
        self.centers = self.data
        if self.degenerate:
            return
        if boundary == "reflect":
            mirrored = [self.data]
            if np.isfinite(self.lower):
                near = self.data[self.data < self.lower + 8.0 * h]
                mirrored.append(2.0 * self.lower - near)
            if np.isfinite(self.upper):
                near = self.data[self.data > self.upper - 8.0 * h]
                mirrored.append(2.0 * self.upper - near)
            self.centers = np.sort(np.concatenate(mirrored))
        lo = max(self.lower, self.data[0] - 8.0 * h)
        hi = min(self.upper, self.data[-1] + 8.0 * h)
        size = int(min(max_grid, max(2049, math.ceil((hi - lo) / h * cells_per_bandwidth) + 1)))
        self.grid = np.linspace(lo, hi, size)
        raw = self._binned_raw_cdf()
        self._base, self._mass = raw[0], raw[-1] - raw[0]
        self.grid_cdf = np.maximum.accumulate(np.clip((raw - raw[0]) / self._mass, 0.0, 1.0))
        self._interp = PchipInterpolator(self.grid, self.grid_cdf, extrapolate=False)
        self._deriv = self._interp.derivative()

    def _binned_raw_cdf(self):
        """Unrestricted kernel-sum CDF on the grid: linear binning, then FFT convolution with Phi."""
        delta = self.grid[1] - self.grid[0]
        # mirrored centers may sit beyond the grid; bin them on a widened grid
        pad_lo = max(0, math.ceil((self.grid[0] - self.centers[0]) / delta))
        pad_hi = max(0, math.ceil((self.centers[-1] - self.grid[-1]) / delta))
        G = self.grid.size + pad_lo + pad_hi
        t = np.clip((self.centers - self.grid[0]) / delta + pad_lo, 0.0, G - 1.0)
        k = np.minimum(t.astype(int), G - 2)
        frac = t - k
        w = np.bincount(k, 1.0 - frac, G) + np.bincount(k + 1, frac, G)
        w /= self.data.size
        offsets = np.arange(-(G - 1), G) * delta / self.bandwidth
        raw = fftconvolve(ndtr(offsets), w, mode="valid")
        return raw[pad_lo:pad_lo + self.grid.size]

    def _raw_cdf(self, x):
        return ndtr((np.asarray(x)[:, None] - self.centers[None, :]) / self.bandwidth)

    def exact_cdf(self, x, chunk=256):
        """Direct kernel-sum CDF (reference for the tabulated one)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.grid[0], self.grid[-1]
        base = float(np.sum(self._raw_cdf(np.array([lo])))) / self.data.size
        mass = float(np.sum(self._raw_cdf(np.array([hi])))) / self.data.size - base
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], chunk):
            out[s:s + chunk] = np.sum(self._raw_cdf(np.clip(x[s:s + chunk], lo, hi)), axis=1) / self.data.size
        return np.clip((out - base) / mass, 0.0, 1.0)

    @property
    def mean(self):
        return float(self.data.mean())

    def pdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.degenerate:
            return np.where(x == self.data[0], np.inf, 0.0)
        z = (x[:, None] - self.centers[None, :]) / self.bandwidth
        dens = np.sum(np.exp(-0.5 * z * z), axis=1) / (self.data.size * self.bandwidth * math.sqrt(2 * math.pi))
        inside = (x >= self.grid[0]) & (x <= self.grid[-1])
        return np.where(inside, dens / self._mass, 0.0)

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.degenerate:
            return np.where(x < self.data[0], 0.0, np.where(x > self.data[0], 1.0, 0.5))
        out = np.empty_like(x)
        below, above = x <= self.grid[0], x >= self.grid[-1]
        mid = ~(below | above)
        out[below], out[above] = 0.0, 1.0
        out[mid] = np.clip(self._interp(x[mid]), 0.0, 1.0)
        return out

    def ppf(self, u):
        """Inverse CDF, solved to |F(x) - u| <= 1e-10 (or bracket width at machine precision)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any((u < 0) | (u > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.degenerate:
            return np.full(u.shape, self.data[0])
        F = self.grid_cdf
        k = np.clip(np.searchsorted(F, u, side="right") - 1, 0, len(F) - 2)
        a, b = self.grid[k].copy(), self.grid[k + 1].copy()
        x = 0.5 * (a + b)
        for _ in range(100):
            fx = self._interp(x) - u
            done = np.abs(fx) <= INVERSE_TOL
            if done.all():
                break
            a = np.where(fx < 0, x, a)
            b = np.where(fx > 0, x, b)
            slope = self._deriv(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = x - fx / slope
            ok = np.isfinite(step) & (step > a) & (step < b)
            x = np.where(done, x, np.where(ok, step, 0.5 * (a + b)))
            if np.all(done | (b - a <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x)))):
                break
        x = np.where(u <= F[0], self.grid[0], x)
        return np.where(u >= F[-1], self.grid[-1], x)


# ---------------------------------------------------------------------------
# Filtered measure


def repair_correlation(C, floor=EIGEN_FLOOR):
    """Nearest-looking valid correlation: clip eigenvalues at ``floor``, rescale to unit diagonal."""
    C = 0.5 * (np.asarray(C, dtype=float) + np.asarray(C, dtype=float).T)
    vals, vecs = np.linalg.eigh(C)
    C = (vecs * np.maximum(vals, floor)) @ vecs.T
    s = np.sqrt(np.diag(C))
    C = C / np.outer(s, s)
    np.fill_diagonal(C, 1.0)
    return 0.5 * (C + C.T)


@dataclass
class FilteredMeasure:
    """Extremum input measure: KDE marginals joined by a Gaussian copula."""

    marginals: list
    correlation: np.ndarray
    samples: np.ndarray
    tail: Tail | None = None
    fraction: float | None = None
    degenerate: list = field(default_factory=list)

    def __post_init__(self):
        C = np.asarray(self.correlation, dtype=float)
        d = len(self.marginals)
        if C.shape != (d, d):
            raise ConfigError("correlation shape does not match the number of marginals")
        if not np.allclose(C, C.T, atol=1e-12) or not np.allclose(np.diag(C), 1.0, atol=1e-12):
            raise ConfigError("correlation must be symmetric with unit diagonal")
        if np.linalg.eigvalsh(C).min() < -1e-9:
            raise NumericalError("correlation matrix is not positive semidefinite after repair")
        self.correlation = C
        if self.fraction is not None and self.tail is not None and not 0.0 < self.fraction < 0.5:
            raise ConfigError("fraction must lie in (0, 0.5)")

    @property
    def dim(self):
        return len(self.marginals)

    def to_uniform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([m.cdf(X[:, k]) for k, m in enumerate(self.marginals)])

    def export(self, prefix, names=None):
        """Write ``<prefix>_samples.csv`` and ``<prefix>_correlation.csv``."""
        prefix = Path(prefix)
        names = names or [f"x{i + 1}" for i in range(self.dim)]
        header = ",".join(names)
        np.savetxt(f"{prefix}_samples.csv", self.samples, delimiter=",", header=header,
                   comments="", fmt="%.17g")
        np.savetxt(f"{prefix}_correlation.csv", self.correlation, delimiter=",", header=header,
                   comments="", fmt="%.17g")
        return Path(f"{prefix}_samples.csv"), Path(f"{prefix}_correlation.csv")


def characterize(samples, families=None, tail=None, fraction=None, bandwidth=None):
    """KDE marginals (Silverman bandwidth) and repaired Pearson correlation of ``samples``.

    When ``families`` is given, each marginal is truncated to that input's support.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = X.shape
    if n < 2:
        raise ConfigError("at least two samples are needed to characterize a measure")
    if n < 10 * d:
        raise ConfigError(f"characterization needs at least 10 d = {10 * d} samples, got {n}")
    supports = [f.support for f in families] if families is not None else [(-np.inf, np.inf)] * d
    marginals = [KernelMarginal(X[:, k], *supports[k], bandwidth=bandwidth) for k in range(d)]
    degenerate = [k for k, m in enumerate(marginals) if m.degenerate]
    sd = X.std(axis=0)
    live = sd > 0
    C = np.eye(d)
    if live.sum() > 1:
        C[np.ix_(live, live)] = np.corrcoef(X[:, live], rowvar=False)
    return FilteredMeasure(marginals, repair_correlation(C), X, None if tail is None else Tail.parse(tail),
                           fraction, degenerate)


def _symmetric_root(C):
    vals, vecs = np.linalg.eigh(C)
    if vals.min() < -1e-9:
        raise NumericalError("correlation matrix is not positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def copula_sample(m, count, seed=None, return_uniforms=False):
    """Draw ``count`` points from the Gaussian-copula model of ``m``."""
    if count < 0:
        raise ConfigError("count must be non-negative")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, m.dim)) @ _symmetric_root(m.correlation)
    U = ndtr(Z)
    X = np.column_stack([mg.ppf(U[:, k]) for k, mg in enumerate(m.marginals)]) if count else np.empty((0, m.dim))
    return (X, U) if return_uniforms else X


# ---------------------------------------------------------------------------
# Gram-Schmidt basis and Alg. 1


@dataclass
class CorrelatedBasis:
    """Basis Phi = Psi R^{-1}, orthonormal on the generating sample of the extremum measure.

    ``base`` selects the factors Psi: ``"cdf"`` uses Legendre polynomials of
    the marginal CDF values, ``"input"`` uses the families of the original
    input space.  ``gram`` is R^T R = A_u^T A_u / N_u and ``column_means`` the
    sample means of the A_u columns.
    """

    measure: FilteredMeasure
    index_set: object
    R_inv: np.ndarray
    gram: np.ndarray
    column_means: np.ndarray
    n_samples: int
    base: str = "cdf"
    input_families: list | None = None

    def psi(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.base == "cdf":
            U = self.measure.to_uniform(X)
            return design_matrix([Uniform(0.0, 1.0)] * self.measure.dim, self.index_set, U)
        return design_matrix(self.input_families, self.index_set, X)

    def phi(self, X):
        return self.psi(X) @ self.R_inv


def _base_design(measure, iset, X, base, input_families):
    if base == "cdf":
        # same map as CorrelatedBasis.psi, so degenerate marginals collapse here too
        return design_matrix([Uniform(0.0, 1.0)] * measure.dim, iset, measure.to_uniform(X))
    return design_matrix(input_families, iset, X)


def orthogonalize(m, degree_or_index_set, n_u=None, seed=None, base="cdf", input_families=None):
    """QR of A_u / sqrt(N_u) on copula samples; returns the orthonormalized basis."""
    if base not in ("cdf", "input"):
        raise ConfigError("base must be 'cdf' or 'input'")
    if base == "input" and input_families is None:
        raise ConfigError("base 'input' needs the input families")
    iset = degree_or_index_set
    if isinstance(iset, (int, np.integer)):
        iset = index_set("total-order", m.dim, int(iset))
    r = len(iset)
    n_u = max(10 * r, 10_000) if n_u is None else int(n_u)
    if n_u < r:
        raise ConfigError(f"N_u = {n_u} is below the basis size r = {r}")
    X = copula_sample(m, n_u, seed)
    A = _base_design(m, iset, X, base, input_families)
    R = linalg.qr(A / math.sqrt(n_u), mode="r")[0][:r]
    d = np.diag(R)
    if np.min(np.abs(d)) <= 1e-12 * np.max(np.abs(d)):
        bad = f" (degenerate marginals: {m.degenerate})" if m.degenerate else ""
        raise NumericalError(f"extremum basis is singular on the sample{bad}")
    R = R * np.sign(d)[:, None]
    R_inv = linalg.solve_triangular(R, np.eye(r))
    return CorrelatedBasis(m, iset, R_inv, R.T @ R, A.mean(axis=0), n_u, base, input_families)


@dataclass
class ExtremumFit:
    """Least-squares coefficients on a CorrelatedBasis and the resulting indices."""

    basis: CorrelatedBasis
    alpha: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def psi_coefficients(self):
        return self.basis.R_inv @ self.alpha

    @property
    def variance(self):
        return float(np.sum(self.alpha[1:] ** 2))

    def predict(self, X):
        return self.basis.phi(X) @ self.alpha

    def _component_weights(self):
        """Psi-coefficients of the components m_S for every subset that can be nonzero."""
        iset = self.basis.index_set
        I = iset.indices
        d = iset.dim
        c = self.psi_coefficients
        mu = self.basis.column_means
        radix = (I.max(initial=0) + 1) ** np.arange(d)
        keys = I @ radix
        order = np.argsort(keys)
        sorted_keys = keys[order]

        def lookup(rows):
            return order[np.searchsorted(sorted_keys, rows @ radix)]

        supports = {frozenset(s) for s in iset.supports}
        reach = set()
        for s in supports:
            for k in range(1, len(s) + 1):
                reach.update(combinations(sorted(s), k))
        weights = {(): np.zeros(len(c))}
        weights[()][0] = float(c @ mu)
        for S in sorted(reach, key=lambda t: (len(t), t)):
            mask = np.zeros(d, dtype=bool)
            mask[list(S)] = True
            pos_v = lookup(I * mask)
            pos_m = lookup(I * ~mask)
            w = np.zeros(len(c))
            np.add.at(w, pos_v, c * mu[pos_m])
            for k in range(len(S)):
                for T in combinations(S, k):
                    w = w - weights[T]
            weights[S] = w
        del weights[()]
        return weights

    def indices(self):
        """Extremum Sobol' index sigma_S for every subset with a nonzero component."""
        var = self.variance
        if var <= 0.0:
            raise NumericalError("fitted extremum polynomial has zero variance")
        c = self.psi_coefficients
        mu = self.basis.column_means
        Gc = self.basis.gram @ c
        mc = float(mu @ c)
        return {S: float(w @ Gc - (mu @ w) * mc) / var for S, w in self._component_weights().items()}

    def sobol(self, S):
        S = tuple(sorted({int(v) for v in S}))
        if any(v < 0 or v >= self.basis.measure.dim for v in S):
            raise ConfigError(f"subset {S} outside the input dimension")
        return self.indices().get(S, 0.0)

    def total(self):
        tot = np.zeros(self.basis.measure.dim)
        for S, v in self.indices().items():
            tot[list(S)] += v
        return tot


def fit_extremum(model_evals, basis):
    """Least-squares coefficients alpha_e on the Phi basis."""
    r = len(basis.index_set)
    if len(model_evals) < r:
        raise UnderdeterminedError(f"extremum fit needs N_e >= r = {r}, got {len(model_evals)}")
    A = basis.phi(model_evals.X)
    alpha, res, rank, _ = np.linalg.lstsq(A, model_evals.f, rcond=None)
    if rank < r:
        raise RankDeficientError(int(rank), r)
    resid = float(np.linalg.norm(A @ alpha - model_evals.f))
    return ExtremumFit(basis, alpha, {"residual": resid, "n_samples": len(model_evals), "rank": int(rank)})


def extremum_sobol(model_evals, basis, S):
    return fit_extremum(model_evals, basis).sobol(S)


# ---------------------------------------------------------------------------
# Pipeline


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass
class TailResult:
    tail: Tail | None
    measure: FilteredMeasure
    fit: ExtremumFit
    total: np.ndarray
    indices: dict


def pool_surrogate(kind, model, families, degree, n_train, seed=None, subspace_dim=None):
    """Global polynomial (``"full"``) or ridge (``"ridge"``) surrogate used to screen the pool."""
    from .pce import fit_least_squares
    from .ridge import estimate_subspace, fit_ridge, polish_subspace

    rng = np.random.default_rng(seed)
    X = sample_inputs(families, n_train, rng)
    samples = SampleSet(X, model(X))
    if kind == "full":
        return fit_least_squares(families, index_set("total-order", len(families), degree), samples)
    if kind == "ridge":
        if subspace_dim is None:
            raise ConfigError("ridge pool needs a subspace dimension")
        sub = estimate_subspace(samples, subspace_dim, families)
        sub = polish_subspace(samples, sub, degree, families)
        return fit_ridge(samples, sub, degree, families, grid="total-order")
    raise ConfigError(f"unknown pool surrogate kind {kind!r}")


def run_tail(model, families, pool_X, pool_y, degree, tail, fraction=DEFAULT_FRACTION,
             n_e=None, n_u=None, seed=None, base="cdf"):
    """Steps 3 and 4 for one tail (``tail=None`` keeps the whole pool)."""
    ss = _seed_sequence(seed)
    s_basis, s_eval = ss.spawn(2)
    if tail is None:
        kept = pool_X
        m = characterize(kept, families)
    else:
        kept = mcf_filter(pool_X, pool_y, fraction, tail)
        m = characterize(kept, families, tail, fraction)
    basis = orthogonalize(m, degree, n_u, s_basis, base, list(families))
    r = len(basis.index_set)
    n_e = 2 * r if n_e is None else int(n_e)
    Xe = copula_sample(m, n_e, s_eval)
    fit = fit_extremum(SampleSet(Xe, model(Xe)), basis)
    idx = fit.indices()
    return TailResult(None if tail is None else Tail.parse(tail), m, fit, fit.total(), idx)


def extremum_pipeline(model, families, degree, pool="model", fraction=DEFAULT_FRACTION,
                      pool_size=DEFAULT_POOL_SIZE, tails=(Tail.BOTTOM, Tail.TOP), n_e=None, n_u=None,
                      seed=None, names=None, base="cdf"):
    """Extremum total indices for each requested tail.

    ``pool`` is ``"model"`` (true evaluations) or a Surrogate used to rank the
    pool; extremum fits always use the true ``model``.
    """
    ss = _seed_sequence(seed)
    s_pool, *s_tails = ss.spawn(1 + len(tails))
    X = sample_inputs(families, pool_size, np.random.default_rng(s_pool))
    if isinstance(pool, Surrogate):
        y = evaluate(pool, X)
        pool_kind = "ridge" if pool.is_ridge else "polynomial"
    elif pool == "model":
        y = np.asarray(model(X), dtype=float)
        pool_kind = "function"
    else:
        raise ConfigError("pool must be 'model' or a fitted surrogate")
    out = {}
    for t, s in zip(tails, s_tails):
        res = run_tail(model, families, X, y, degree, t, fraction, n_e, n_u, s, base)
        key = "all" if t is None else Tail.parse(t).value
        meta = {"pool": pool_kind, "pool_size": pool_size, "fraction": fraction, "degree": degree,
                "n_e": res.fit.diagnostics["n_samples"], "n_u": res.fit.basis.n_samples,
                "retained": int(res.measure.samples.shape[0]), "base": base,
                "index_sum": float(sum(res.indices.values()))}
        entries = {(i,): float(v) for i, v in enumerate(res.total)}
        out[key] = (SensitivityReport(f"extremum-{key}", entries, meta, names), res)
    return out
