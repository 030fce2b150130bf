"""Orthonormal polynomial families, Gauss quadrature and multi-index bases.

Every family is standardized internally (uniform inputs to [-1, 1], Gaussian
inputs to zero mean and unit variance) and normalized so that
``E[psi_k psi_l] = delta_kl`` under the family's own density.  All arguments
and returned quadrature points are in physical units.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special, stats

from .errors import ConfigError, NumericalError

DEFAULT_CARDINALITY_CAP = 10**7
GAUSSIAN_CLIP = 8.0


class MarginalFamily:
    """Base class of the supported input marginals."""

    kind = "abstract"

    def standardize(self, x):
        raise NotImplementedError

    def unstandardize(self, z):
        raise NotImplementedError

    def recurrence(self, n):
        """Monic recurrence coefficients (a_k, b_k), k < n, of the standard measure."""
        raise NotImplementedError

    def sample(self, rng, size):
        return self.ppf(rng.random(size))

    def ppf(self, u):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    @property
    def support(self):
        raise NotImplementedError

    def evaluate(self, max_degree, x):
        """Table of psi_0..psi_max_degree at ``x``; shape (len(x), max_degree + 1)."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input to polynomial evaluation")
        z = self.standardize(np.atleast_1d(x))
        return _orthonormal_table(self.recurrence(max_degree + 1), max_degree, z)

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(MarginalFamily):
    lower: float
    upper: float
    kind = "uniform"

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)) or self.lower >= self.upper:
            raise ConfigError(f"uniform family needs lower < upper, got [{self.lower}, {self.upper}]")

    def standardize(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower) - 1.0

    def unstandardize(self, z):
        return self.lower + 0.5 * (np.asarray(z, dtype=float) + 1.0) * (self.upper - self.lower)

    def recurrence(self, n):
        k = np.arange(n, dtype=float)
        b = np.where(k == 0, 1.0, k**2 / np.maximum(4.0 * k**2 - 1.0, 1.0))
        return np.zeros(n), b

    def ppf(self, u):
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower), 0.0, 1.0)

    @property
    def support(self):
        return (self.lower, self.upper)

    @property
    def variance(self):
        return (self.upper - self.lower) ** 2 / 12.0

    def to_dict(self):
        return {"distribution": "uniform", "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Gaussian(MarginalFamily):
    mean: float
    std: float
    kind = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.std)) or self.std <= 0:
            raise ConfigError(f"gaussian family needs std > 0, got {self.std}")

    def standardize(self, x):
        # the basis is only evaluated inside +-8 standard deviations
        return np.clip((np.asarray(x, dtype=float) - self.mean) / self.std, -GAUSSIAN_CLIP, GAUSSIAN_CLIP)

    def unstandardize(self, z):
        return self.mean + self.std * np.asarray(z, dtype=float)

    def recurrence(self, n):
        k = np.arange(n, dtype=float)
        return np.zeros(n), np.where(k == 0, 1.0, k)

    def ppf(self, u):
        return self.mean + self.std * special.ndtri(np.asarray(u, dtype=float))

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.std)

    @property
    def support(self):
        return (-np.inf, np.inf)

    @property
    def variance(self):
        return self.std**2

    def to_dict(self):
        return {"distribution": "gaussian", "mean": self.mean, "std": self.std}


def family_from_dict(spec):
    kind = str(spec.get("distribution", "")).lower()
    try:
        if kind == "uniform":
            return Uniform(float(spec["lower"]), float(spec["upper"]))
        if kind in ("gaussian", "normal"):
            return Gaussian(float(spec["mean"]), float(spec["std"]))
    except KeyError as exc:
        raise ConfigError(f"marginal {spec!r} is missing field {exc.args[0]!r}") from None
    raise ConfigError(f"unknown distribution {spec.get('distribution')!r}")


def _orthonormal_table(rec, max_degree, z):
    a, b = rec
    out = np.empty((z.shape[0], max_degree + 1))
    out[:, 0] = 1.0
    if max_degree >= 1:
        out[:, 1] = (z - a[0]) / np.sqrt(b[1])
    for k in range(1, max_degree):
        out[:, k + 1] = ((z - a[k]) * out[:, k] - np.sqrt(b[k]) * out[:, k - 1]) / np.sqrt(b[k + 1])
    return out


def univariate_eval(family, k, x):
    """Orthonormal polynomial of degree ``k`` of ``family`` evaluated at ``x``."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    vals = family.evaluate(k, np.atleast_1d(x))[:, k]
    return float(vals[0]) if np.ndim(x) == 0 else vals


# ---------------------------------------------------------------------------
# quadrature


@dataclass
class QuadratureRule:
    """Quadrature points (M x d, physical units) and weights summing to one.

    Tensor rules keep their 1-D factors so that product integrands can be
    integrated factor by factor and points can be streamed in chunks.
    """

    _points: np.ndarray | None = None
    _weights: np.ndarray | None = None
    factors: list | None = field(default=None, repr=False)

    @property
    def dim(self):
        if self.factors is not None:
            return len(self.factors)
        return self._points.shape[1]

    @property
    def size(self):
        if self.factors is not None:
            return math.prod(len(w) for _, w in self.factors)
        return len(self._weights)

    @cached_property
    def points(self):
        if self._points is not None:
            return self._points
        grids = np.meshgrid(*[p for p, _ in self.factors], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def weights(self):
        if self._weights is not None:
            return self._weights
        w = np.ones(1)
        for _, wk in self.factors:
            w = np.multiply.outer(w, wk).ravel()
        return w

    def chunks(self, chunk_size=200_000):
        """Yield (points, weights) blocks covering the rule."""
        if self.factors is None:
            for s in range(0, self.size, chunk_size):
                yield self._points[s:s + chunk_size], self._weights[s:s + chunk_size]
            return
        shape = [len(w) for _, w in self.factors]
        for s in range(0, self.size, chunk_size):
            flat = np.arange(s, min(s + chunk_size, self.size))
            idx = np.unravel_index(flat, shape)
            pts = np.stack([p[i] for (p, _), i in zip(self.factors, idx)], axis=1)
            w = np.ones(len(flat))
            for (_, wk), i in zip(self.factors, idx):
                w = w * wk[i]
            yield pts, w


def gauss_rule(family, n_points):
    """Golub-Welsch Gauss rule with ``n_points`` nodes, weights normalized to one."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    a, b = family.recurrence(n_points)
    off = np.sqrt(b[1:n_points])
    try:
        nodes, vecs = np.linalg.eigh(np.diag(a) + np.diag(off, 1) + np.diag(off, -1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Jacobi eigenproblem failed for {family}: {exc}") from exc
    w = vecs[0, :] ** 2
    w = w / w.sum()
    # eigh may return tiny asymmetries for symmetric measures
    if np.allclose(a, 0.0):
        nodes = 0.5 * (nodes - nodes[::-1])
        w = 0.5 * (w + w[::-1])
    return QuadratureRule(np.asarray(family.unstandardize(nodes)).reshape(-1, 1), w)


def tensor_rule(families, level, cap=DEFAULT_CARDINALITY_CAP):
    """Full tensor product of (level + 1)-point Gauss rules."""
    if level < 0:
        raise ValueError("level must be >= 0")
    count = (level + 1) ** len(families)
    if count > cap:
        raise ConfigError(f"tensor rule with {count} points exceeds cap {cap}")
    factors = []
    for fam in families:
        r = gauss_rule(fam, level + 1)
        factors.append((r.points[:, 0], r.weights))
    return QuadratureRule(factors=factors)


# ---------------------------------------------------------------------------
# multi-indices


def nz(index):
    """Zero-based positions of the nonzero entries of a multi-index."""
    return tuple(int(k) for k in np.flatnonzero(np.asarray(index)))


def _graded_key(index):
    return (sum(index), tuple(-i for i in index))


@dataclass(frozen=True)
class IndexSet:
    dim: int
    indices: np.ndarray  # (r, dim) int array, row 0 is the constant term
    scheme: str = "explicit"
    order: int | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.dim)
        object.__setattr__(self, "indices", idx)
        if idx.shape[0] == 0 or np.any(idx[0] != 0):
            raise ValueError("first multi-index must be the constant term")
        if np.any(idx < 0):
            raise ValueError("multi-indices must be non-negative")
        if len({tuple(r) for r in idx.tolist()}) != idx.shape[0]:
            raise ValueError("duplicate multi-indices")

    def __len__(self):
        return self.indices.shape[0]

    @property
    def cardinality(self):
        return len(self)

    @property
    def max_degree(self):
        return int(self.indices.max()) if len(self) else 0

    @cached_property
    def supports(self):
        return [nz(row) for row in self.indices]

    @cached_property
    def position(self):
        return {tuple(r): i for i, r in enumerate(self.indices.tolist())}

    def to_dict(self):
        return {"dim": self.dim, "scheme": self.scheme, "order": self.order,
                "indices": self.indices.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["dim"]), np.asarray(data["indices"], dtype=np.int64),
                   data.get("scheme", "explicit"), data.get("order"))


def _total_order(d, p):
    out = []
    for total in range(p + 1):
        # compositions of `total` into d parts, emitted in descending lex order
        for bars in itertools.combinations(range(total + d - 1), d - 1):
            parts, prev = [], -1
            for b in bars:
                parts.append(b - prev - 1)
                prev = b
            parts.append(total + d - 1 - prev - 1)
            out.append(tuple(parts))
    out.sort(key=_graded_key)
    return out


def index_set(scheme, d, p, cap=DEFAULT_CARDINALITY_CAP):
    """Total-order or tensor-grid index set in graded lexicographic order."""
    if d < 1 or p < 0:
        raise ValueError("need d >= 1 and p >= 0")
    scheme = scheme.lower().replace("_", "-")
    if scheme in ("total-order", "totalorder", "total"):
        count = math.comb(d + p, p)
        if count > cap:
            raise ConfigError(f"total-order set of size {count} exceeds cap {cap}")
        return IndexSet(d, np.array(_total_order(d, p), dtype=np.int64).reshape(-1, d), "total-order", p)
    if scheme in ("tensor-grid", "tensorgrid", "tensor"):
        count = (p + 1) ** d
        if count > cap:
            raise ConfigError(f"tensor-grid set of size {count} exceeds cap {cap}")
        rows = sorted(itertools.product(range(p + 1), repeat=d), key=_graded_key)
        return IndexSet(d, np.array(rows, dtype=np.int64).reshape(-1, d), "tensor-grid", p)
    raise ConfigError(f"unknown index-set scheme {scheme!r}")


def explicit_index_set(rows):
    rows = [tuple(int(v) for v in r) for r in rows]
    d = len(rows[0])
    zero = (0,) * d
    rest = [r for r in rows if r != zero]
    return IndexSet(d, np.array([zero] + rest, dtype=np.int64), "explicit")


def design_matrix(families, iset, X):
    """N x r matrix with entries prod_k psi_{i_k}(x_k)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(families) or iset.dim != len(families):
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, basis has {len(families)}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite sample in design matrix")
    # built transposed so each factor update touches contiguous rows; only
    # terms with a nonzero degree in dimension k need the k-th factor
    At = np.ones((len(iset), X.shape[0]))
    for k, fam in enumerate(families):
        col = iset.indices[:, k]
        top = int(col.max())
        if top == 0:
            continue
        table = np.ascontiguousarray(fam.evaluate(top, X[:, k]).T)
        rows = np.flatnonzero(col)
        At[rows] *= table[col[rows]]
    return At.T


def sample_inputs(families, n, rng):
    """Draw ``n`` independent samples from the product measure."""
    return np.column_stack([fam.sample(rng, n) for fam in families]) if n else np.empty((0, len(families)))


def uniform_to_inputs(families, U):
    """Map points of the unit cube to physical inputs through inverse CDFs."""
    U = np.atleast_2d(U)
    return np.column_stack([fam.ppf(U[:, k]) for k, fam in enumerate(families)])


def family_moment(family, m):
    """Exact raw moment E[x^m] of ``family`` (used by quadrature tests)."""
    if isinstance(family, Uniform):
        a, b = family.lower, family.upper
        return (b ** (m + 1) - a ** (m + 1)) / ((m + 1) * (b - a))
    return float(stats.norm(family.mean, family.std).moment(m))
