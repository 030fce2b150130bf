"""Ridge approximation: subspace estimation, reduced fits and coefficient lifting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, NumericalError, ZeroVarianceError
from .orthobasis import IndexSet, Uniform, design_matrix, index_set, sample_inputs
from .pce import Surrogate, solve_least_squares


@dataclass
class Subspace:
    M: np.ndarray

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        d, n = self.M.shape
        if not 1 <= n < d:
            raise ConfigError(f"subspace needs 1 <= n < d, got n={n}, d={d}")
        if not np.allclose(self.M.T @ self.M, np.eye(n), atol=1e-10):
            raise ConfigError("subspace columns are not orthonormal")

    @property
    def n(self):
        return self.M.shape[1]

    @property
    def d(self):
        return self.M.shape[0]

    def angle(self, other):
        """Largest principal angle (radians) to another subspace or d x k matrix."""
        B = other.M if isinstance(other, Subspace) else np.linalg.qr(np.atleast_2d(other).reshape(self.d, -1))[0]
        s = np.linalg.svd(self.M.T @ B, compute_uv=False)
        return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def orthonormalize(M):
    """Orthonormal basis of span(M) with a deterministic sign convention."""
    Q, R = np.linalg.qr(np.asarray(M, dtype=float))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def standardized_inputs(families, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([fam.standardize(X[:, k]) for k, fam in enumerate(families)])


def estimate_subspace(samples, n, families, neighbors=None, iterations=1):
    """Outer product of gradients from local linear fits.

    Each sample's gradient is estimated by a Gaussian-weighted linear fit on
    its ``neighbors`` nearest points (in standardized coordinates); the top-n
    eigenvectors of the averaged gradient outer product span the subspace.
    With ``iterations > 1`` the neighbourhood metric is refined towards the
    current estimate, as in the refined OPG.
    """
    Z = standardized_inputs(families, samples.X)
    N, d = Z.shape
    if not 1 <= n < d:
        raise ConfigError(f"subspace dimension must satisfy 1 <= n < d = {d}; for n = d use a full-space fit")
    y = samples.f
    if np.ptp(y) == 0.0:
        raise ZeroVarianceError("constant outputs carry no subspace information")
    k = min(N, neighbors or max(2 * d, 20))
    if k < d + 1:
        raise ConfigError(f"need at least d + 1 = {d + 1} samples for local linear fits")
    B = np.eye(d)
    for it in range(max(1, iterations)):
        # distances measured in a metric shrinking the inactive directions
        metric = np.eye(d) if it == 0 else B @ B.T + 0.1 * np.eye(d)
        L = np.linalg.cholesky(metric)
        tree = cKDTree(Z @ L)
        dist, nbr = tree.query(Z @ L, k=k)
        grads = np.empty((N, d))
        for i in range(N):
            h = max(dist[i, -1], 1e-12)
            w = np.sqrt(np.exp(-0.5 * (dist[i] / h) ** 2))
            D = np.column_stack([np.ones(k), Z[nbr[i]] - Z[i]]) * w[:, None]
            coef = np.linalg.lstsq(D, y[nbr[i]] * w, rcond=None)[0]
            grads[i] = coef[1:]
        C = grads.T @ grads / N
        vals, vecs = np.linalg.eigh(C)
        order = np.argsort(vals)[::-1]
        B = vecs[:, order[:n]]
    return Subspace(orthonormalize(B))


def polish_subspace(samples, subspace, degree, families, grid="total-order", max_nfev=200):
    """Refine a subspace by minimizing the ridge-fit residual over M.

    The residual of the least-squares ridge fit is minimized over local
    coordinates M(K) = orth(M0 + M0_perp K), starting from K = 0.
    """
    from scipy.optimize import least_squares

    M0 = subspace.M if isinstance(subspace, Subspace) else np.asarray(subspace, dtype=float)
    d, n = M0.shape
    perp = np.linalg.svd(np.eye(d) - M0 @ M0.T)[0][:, : d - n]
    Z = standardized_inputs(families, samples.X)
    iset = index_set(grid, n, degree)
    rfams = reduced_families(d, n)
    y = samples.f

    def frame(k):
        return np.linalg.qr(M0 + perp @ k.reshape(d - n, n))[0]

    def resid(k):
        U = np.clip(Z @ frame(k), -1.5 * rfams[0].upper, 1.5 * rfams[0].upper)
        A = design_matrix(rfams, iset, U)
        c = np.linalg.lstsq(A, y, rcond=None)[0]
        return A @ c - y

    if len(y) <= len(iset) + n * (d - n):
        return Subspace(orthonormalize(M0))
    sol = least_squares(resid, np.zeros((d - n) * n), method="lm", max_nfev=max_nfev)
    return Subspace(orthonormalize(frame(sol.x)))


def reduced_families(d, n):
    """Legendre families on [-sqrt(d), sqrt(d)] for the projected coordinates."""
    L = math.sqrt(d)
    return [Uniform(-L, L) for _ in range(n)]


def fit_ridge(samples, subspace, degree, families, grid="tensor-grid"):
    """Least-squares fit of p_n(M^T z) on the standardized inputs z."""
    M = subspace.M if isinstance(subspace, Subspace) else np.asarray(subspace, dtype=float)
    d, n = M.shape
    iset = index_set(grid, n, degree)
    if len(samples) < len(iset):
        raise ConfigError(f"ridge fit needs N >= q = {len(iset)} samples, got {len(samples)}")
    rfams = reduced_families(d, n)
    shell = Surrogate(list(families), iset, np.zeros(len(iset)), M, rfams)
    A = shell.basis(samples.X)
    coef, info = solve_least_squares(A, samples.f)
    info["n_samples"] = len(samples)
    info["rms_residual"] = info["residual"] / math.sqrt(len(samples))
    return Surrogate(list(families), iset, coef, M, rfams, info)


def required_total_order(ridge):
    """Smallest full-space total order that represents the ridge exactly."""
    return int(ridge.index_set.indices.sum(axis=1).max())


def lift_coefficients(ridge, full_iset, lift_sample_count=None, rng=None, tol=1e-8):
    """Full-space coefficients alpha solving A_d alpha = A_n beta in least squares."""
    if not ridge.is_ridge:
        raise ConfigError("lift_coefficients expects a ridge surrogate")
    if full_iset.dim != ridge.dim:
        raise ConfigError("full index set dimension does not match the ridge input dimension")
    need = required_total_order(ridge)
    have = int(full_iset.indices.sum(axis=1).max())
    if full_iset.scheme == "total-order" and have < need:
        raise ConfigError(f"ridge of composite degree {need} is not representable in a "
                          f"total-order-{have} basis")
    r = len(full_iset)
    count = lift_sample_count or max(2 * r, r + 50)
    if count < r:
        raise ConfigError(f"lift needs at least r = {r} samples, got {count}")
    rng = np.random.default_rng(rng)
    X = sample_inputs(ridge.families, count, rng)
    rhs = ridge.basis(X) @ ridge.coefficients
    A = design_matrix(ridge.families, full_iset, X)
    alpha, info = solve_least_squares(A, rhs)
    rel = info["residual"] / max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if rel > tol:
        raise NumericalError(f"lift residual {rel:.3e} exceeds {tol:g}: full basis cannot "
                             "represent the ridge")
    info.update(lift_residual=rel, lift_samples=count, ridge=ridge.diagnostics)
    return Surrogate(list(ridge.families), full_iset, alpha, diagnostics=info)


def save_subspace(path, subspace):
    M = subspace.M if isinstance(subspace, Subspace) else np.asarray(subspace)
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def load_subspace(path):
    M = np.loadtxt(path, delimiter=",", ndmin=2)
    return Subspace(M)
