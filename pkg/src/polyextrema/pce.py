"""Least-squares polynomial chaos surrogates and coefficient-based Sobol' indices."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, RankDeficientError, UnderdeterminedError, ZeroVarianceError
from .orthobasis import IndexSet, design_matrix, family_from_dict

ZERO_VARIANCE_RTOL = 1e-24


@dataclass
class SampleSet:
    X: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.f = np.asarray(self.f, dtype=float).ravel()
        if self.X.shape[0] != self.f.shape[0] or self.X.shape[0] < 1:
            raise ValueError(f"sample set needs matching N >= 1 rows, got X {self.X.shape}, f {self.f.shape}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.f))):
            raise ValueError("sample set contains non-finite entries")

    def __len__(self):
        return self.f.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]


def solve_least_squares(A, f, rcond=1e-12):
    """Minimize ||A c - f||_2 with a column-pivoted QR factorization.

    Returns the coefficients and a diagnostics dict (residual, rank,
    condition estimate).  Raises RankDeficientError if the numerical rank
    is below the number of columns.
    """
    n, r = A.shape
    if n < r:
        raise UnderdeterminedError(
            f"underdetermined fit: {n} samples for {r} coefficients; use the sparse (LARS) fit")
    Q, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rcond * diag[0])) if r else 0
    if rank < r:
        raise RankDeficientError(rank, r)
    z = linalg.solve_triangular(R, Q.T @ f)
    coef = np.empty(r)
    coef[piv] = z
    resid = float(np.linalg.norm(A @ coef - f))
    return coef, {"residual": resid, "rank": rank, "condition": float(diag[0] / diag[-1])}


@dataclass
class Surrogate:
    """Polynomial surrogate ``sum_i c_i Psi_i``.

    ``families`` always lists the d physical input marginals.  A ridge
    surrogate additionally carries ``subspace`` (d x n, acting on
    standardized inputs) and the ``reduced_families`` of its n-dimensional
    basis; ``index_set`` then lives in n dimensions.
    """

    families: list
    index_set: IndexSet
    coefficients: np.ndarray
    subspace: np.ndarray | None = None
    reduced_families: list | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        if self.coefficients.shape[0] != len(self.index_set):
            raise ValueError("coefficient count does not match index set cardinality")
        if self.subspace is not None:
            M = np.asarray(self.subspace, dtype=float)
            if M.shape != (len(self.families), self.index_set.dim):
                raise ValueError(f"subspace shape {M.shape} incompatible with basis")
            if not np.allclose(M.T @ M, np.eye(M.shape[1]), atol=1e-10):
                raise ValueError("subspace columns must be orthonormal")
            self.subspace = M
        elif self.index_set.dim != len(self.families):
            raise ValueError("index set dimension does not match the number of families")

    @property
    def dim(self):
        return len(self.families)

    @property
    def is_ridge(self):
        return self.subspace is not None

    def project(self, X):
        """Standardize physical inputs and project onto the subspace."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = np.column_stack([fam.standardize(X[:, k]) for k, fam in enumerate(self.families)])
        U = Z @ self.subspace
        # points beyond 1.5x the reduced-basis box are clipped back to it
        lo = np.array([f.lower for f in self.reduced_families])
        hi = np.array([f.upper for f in self.reduced_families])
        mid, half = 0.5 * (lo + hi), 0.75 * (hi - lo)
        far = np.abs(U - mid) > half
        if far.any():
            warnings.warn(f"{int(far.any(axis=1).sum())} projected points far outside the "
                          "reduced-basis box were clipped", RuntimeWarning, stacklevel=3)
            U = np.clip(U, mid - half, mid + half)
        return U

    def basis(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} input columns, got {X.shape[1]}")
        if self.is_ridge:
            return design_matrix(self.reduced_families, self.index_set, self.project(X))
        return design_matrix(self.families, self.index_set, X)

    def to_dict(self):
        out = {
            "families": [f.to_dict() for f in self.families],
            "index_set": self.index_set.to_dict(),
            "coefficients": self.coefficients.tolist(),
            "diagnostics": self.diagnostics,
        }
        if self.is_ridge:
            out["subspace"] = self.subspace.tolist()
            out["reduced_families"] = [f.to_dict() for f in self.reduced_families]
        return out

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                [family_from_dict(f) for f in data["families"]],
                IndexSet.from_dict(data["index_set"]),
                np.asarray(data["coefficients"], dtype=float),
                None if data.get("subspace") is None else np.asarray(data["subspace"], dtype=float),
                None if data.get("reduced_families") is None
                else [family_from_dict(f) for f in data["reduced_families"]],
                dict(data.get("diagnostics", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed surrogate document: {exc}") from exc


def fit_least_squares(families, iset, samples):
    A = design_matrix(families, iset, samples.X)
    coef, info = solve_least_squares(A, samples.f)
    info["n_samples"] = len(samples)
    return Surrogate(list(families), iset, coef, diagnostics=info)


def evaluate(s, X, chunk_size=4096):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] <= chunk_size:
        return s.basis(X) @ s.coefficients
    return np.concatenate([s.basis(X[i:i + chunk_size]) @ s.coefficients
                           for i in range(0, X.shape[0], chunk_size)])


def mean(s):
    return float(s.coefficients[0])


def variance(s):
    _require_full_space(s)
    return float(np.sum(s.coefficients[1:] ** 2))


def _require_full_space(s):
    if s.is_ridge:
        raise ConfigError("moments and indices need a full-space surrogate; lift the ridge first")


def sobol_indices(s):
    """All nonzero Sobol' indices, keyed by sorted zero-based variable tuples."""
    var = variance(s)
    # rounding noise of a fitted constant is not variance
    if var <= ZERO_VARIANCE_RTOL * s.coefficients[0] ** 2 or var == 0.0:
        raise ZeroVarianceError("surrogate is constant: Sobol' indices undefined")
    out = {}
    for support, c in zip(s.index_set.supports[1:], s.coefficients[1:]):
        out[support] = out.get(support, 0.0) + c * c
    return {S: v / var for S, v in out.items()}


def sobol_index(s, S):
    S = _subset(S, s.dim)
    return sobol_indices(s).get(S, 0.0)


def total_sobol_indices(s):
    tot = np.zeros(s.dim)
    for S, v in sobol_indices(s).items():
        tot[list(S)] += v
    return tot


def total_sobol(s, i):
    if not 0 <= i < s.dim:
        raise ConfigError(f"variable {i} outside 0..{s.dim - 1}")
    return float(total_sobol_indices(s)[i])


def _subset(S, d):
    S = tuple(sorted({int(v) for v in S}))
    if any(v < 0 or v >= d for v in S):
        raise ConfigError(f"subset {S} references variables outside 0..{d - 1}")
    return S


def subset_label(S, names=None):
    if names is None:
        return ",".join(f"x{i + 1}" for i in S)
    return ",".join(names[i] for i in S)


@dataclass
class SensitivityReport:
    """Named index values with estimator metadata.

    ``entries`` maps zero-based variable tuples to values; ``spread``
    optionally holds standard deviations over repeated trials.
    """

    kind: str
    entries: dict
    metadata: dict = field(default_factory=dict)
    names: list | None = None
    spread: dict | None = None

    def to_dict(self):
        rows = []
        for S in sorted(self.entries, key=lambda t: (len(t), t)):
            row = {"subset": [i + 1 for i in S], "label": subset_label(S, self.names),
                   "mean": self.entries[S]}
            if self.spread is not None:
                row["sd"] = self.spread.get(S)
            rows.append(row)
        return {"kind": self.kind, "entries": rows, "metadata": self.metadata}


def fit_quadrature(func, families, iset, rule):
    """Spectral projection: coefficients E[f Psi_i] computed with a quadrature rule."""
    coef = np.zeros(len(iset))
    for pts, w in rule.chunks():
        coef += design_matrix(families, iset, pts).T @ (func(pts) * w)
    return Surrogate(list(families), iset, coef, diagnostics={"quadrature_points": rule.size})
