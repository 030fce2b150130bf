"""Least angle regression and degree-adaptive sparse PCE fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .orthobasis import design_matrix, explicit_index_set, index_set
from .pce import Surrogate

_TINY = 1e-12


@dataclass
class LarsPath:
    """Entry order and coefficients of a LARS path.

    ``coefficients[k]`` holds the coefficients (one per design column, in
    original units) after ``k`` predictors have entered; ``intercepts[k]``
    is the matching constant.
    """

    entered: list
    coefficients: list
    intercepts: list
    skipped: list = field(default_factory=list)
    loo_error: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.coefficients)

    @property
    def active(self):
        return list(self.entered)


def lars_select(design, y, fit_intercept=True, max_steps=None):
    """Classic LARS path (Efron et al.) on the columns of ``design``.

    Columns are centered (when ``fit_intercept``) and scaled to unit norm
    before the path is traced.  The path stops once ``min(p, N - 1)``
    predictors are active (``N`` without an intercept), ``max_steps`` is
    reached, or the residual is uncorrelated with every column.  Exactly
    collinear predictors are skipped with a warning.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    N, p = X.shape
    if N != y.shape[0]:
        raise ConfigError("design and response lengths differ")
    xm = X.mean(axis=0) if fit_intercept else np.zeros(p)
    ym = float(y.mean()) if fit_intercept else 0.0
    Xc = X - xm
    norms = np.linalg.norm(Xc, axis=0)
    usable = norms > _TINY * max(1.0, norms.max(initial=0.0))
    safe = np.where(usable, norms, 1.0)
    Xs = np.where(usable, Xc / safe, 0.0)
    r = y - ym

    limit = min(p, N - 1 if fit_intercept else N)
    if max_steps is not None:
        limit = min(limit, max(0, max_steps))
    tol = 1e-10 * max(np.linalg.norm(r), _TINY)
    beta = np.zeros(p)
    excluded = ~usable
    active, signs, skipped = [], [], []
    coefs, intercepts = [np.zeros(p)], [ym]
    pending = None

    while True:
        c = Xs.T @ r
        if pending is None and not active:
            pool = np.flatnonzero(~excluded)
            if limit == 0 or len(pool) == 0 or np.abs(c[pool]).max() <= tol:
                break
            pending = int(pool[np.argmax(np.abs(c[pool]))])
        if pending is not None:
            if _admit(Xs, active, pending):
                active.append(pending)
                signs.append(1.0 if c[pending] >= 0 else -1.0)
            else:
                warnings.warn(f"predictor {pending} is collinear with the active set and was skipped",
                              RuntimeWarning, stacklevel=2)
                skipped.append(pending)
                excluded[pending] = True
            pending = None
        C = float(np.abs(c[active]).max())
        if C <= tol:
            break
        sg = np.array(signs)
        XA = Xs[:, active] * sg
        Ginv1 = np.linalg.solve(XA.T @ XA, np.ones(len(active)))
        AA = 1.0 / np.sqrt(Ginv1.sum())
        wA = AA * Ginv1
        u = XA @ wA
        a = Xs.T @ u
        gamma, nxt = C / AA, None
        if len(active) < limit:
            rest = np.flatnonzero(~excluded)
            rest = rest[~np.isin(rest, active)]
            if rest.size:
                num = np.concatenate([C - c[rest], C + c[rest]])
                den = np.concatenate([AA - a[rest], AA + a[rest]])
                with np.errstate(divide="ignore", invalid="ignore"):
                    g = np.where(np.abs(den) > _TINY, num / den, np.inf)
                g[g <= _TINY] = np.inf
                k = int(np.argmin(g))
                if g[k] < gamma:
                    gamma, nxt = float(g[k]), int(rest[k % rest.size])
        beta[active] += gamma * sg * wA
        r = r - gamma * u
        coefs.append(np.where(usable, beta / safe, 0.0))
        intercepts.append(ym - float(coefs[-1] @ xm))
        if nxt is None:
            break
        pending = nxt
    return LarsPath(list(active), coefs, intercepts, skipped)


def _admit(Xs, active, j):
    if not active:
        return True
    XA = Xs[:, active]
    proj = XA @ np.linalg.lstsq(XA, Xs[:, j], rcond=None)[0]
    return np.linalg.norm(Xs[:, j] - proj) > 1e-10


def loo_error(A, y):
    """Mean squared leave-one-out error of the least-squares fit on ``A``.

    Uses the hat-matrix identity e_i = (y_i - yhat_i) / (1 - h_ii).
    """
    N, k = A.shape
    if k >= N:
        return np.inf
    Q, R = np.linalg.qr(A)
    if np.min(np.abs(np.diag(R))) <= 1e-12 * np.max(np.abs(np.diag(R))):
        return np.inf
    h = np.sum(Q**2, axis=1)
    resid = y - Q @ (Q.T @ y)
    if np.any(h >= 1.0 - 1e-10):
        return 0.0 if np.allclose(resid, 0.0, atol=1e-12 * max(1.0, np.abs(y).max())) else np.inf
    return float(np.mean((resid / (1.0 - h)) ** 2))


def adaptive_lars_fit(samples, families, p_max=4):
    """Degree-adaptive LARS: pick the total degree whose pruned basis has least LOO error."""
    if len(samples) < 2:
        raise ConfigError("adaptive LARS needs at least two samples")
    if p_max < 1:
        raise ConfigError("p_max must be >= 1")
    y = samples.f
    N = len(y)
    best = None
    loo = {}
    for p in range(1, p_max + 1):
        iset = index_set("total-order", samples.dim, p)
        A = design_matrix(families, iset, samples.X)
        path = lars_select(A[:, 1:], y, max_steps=N - 2 if N > 2 else 0)
        keep = [0] + [j + 1 for j in path.entered if abs(path.coefficients[-1][j]) > 0.0]
        err = loo_error(A[:, keep], y)
        loo[p] = err
        if best is None or err < best[0] - 1e-15 * max(1.0, abs(best[0])):
            best = (err, p, iset, keep)
    err, p, iset, keep = best
    sub = explicit_index_set(iset.indices[keep])
    A = design_matrix(families, sub, samples.X)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    diag = {"degree": p, "loo_error": err, "loo_by_degree": loo, "n_terms": len(sub),
            "n_samples": N, "residual": float(np.linalg.norm(A @ coef - y))}
    return Surrogate(list(families), sub, coef, diagnostics=diag)
