"""Sobol' low-discrepancy points and pick-freeze Sobol' index estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import combinations

import numpy as np

from .errors import ConfigError, ZeroVarianceError
from .orthobasis import uniform_to_inputs

BITS = 32
TABLE_FILE = "sobol_directions.txt"


@lru_cache(maxsize=1)
def _direction_table():
    text = resources.files("polyextrema").joinpath("data", TABLE_FILE).read_text(encoding="utf-8")
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line[0].isalpha():
            continue
        vals = [int(v) for v in line.split()]
        d, s, a, m = vals[0], vals[1], vals[2], vals[3:]
        if len(m) != s:
            raise ValueError(f"malformed direction-number row for dimension {d}")
        rows.append((s, a, tuple(m)))
    return tuple(rows)


def max_dimension():
    return len(_direction_table()) + 1


@lru_cache(maxsize=64)
def _directions(dim):
    """BITS x dim array of direction integers v_j scaled to the top bit."""
    if dim > max_dimension():
        raise ConfigError(f"Sobol' table supports at most {max_dimension()} dimensions, got {dim}")
    V = np.zeros((BITS, dim), dtype=np.uint64)
    V[:, 0] = [1 << (BITS - 1 - j) for j in range(BITS)]
    for k, (s, a, m) in enumerate(_direction_table()[: dim - 1], start=1):
        v = [m[j] << (BITS - 1 - j) for j in range(min(s, BITS))]
        for j in range(s, BITS):
            x = v[j - s] ^ (v[j - s] >> s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    x ^= v[j - i]
            v.append(x)
        V[:, k] = v
    return V


@dataclass(frozen=True)
class SobolSequence:
    """Unscrambled Sobol' sequence with the bundled direction numbers."""

    dim: int
    skip: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dimension must be positive")
        if self.skip < 0:
            raise ConfigError("skip must be non-negative")
        _directions(self.dim)

    def points(self, n, start=0):
        """Rows ``skip + start`` .. ``skip + start + n - 1`` of the sequence."""
        if n < 0:
            raise ConfigError("number of points must be non-negative")
        i = np.arange(self.skip + start, self.skip + start + n, dtype=np.uint64)
        if n and int(i[-1]) >= 2**BITS:
            raise ConfigError(f"Sobol' index exceeds 2^{BITS}")
        gray = i ^ (i >> np.uint64(1))
        V = _directions(self.dim)
        X = np.zeros((n, self.dim), dtype=np.uint64)
        for b in range(BITS):
            bit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
            if not bit.any():
                if (gray >> np.uint64(b)).max(initial=0) == 0:
                    break
                continue
            X[bit] ^= V[b]
        return X.astype(float) / 2.0**BITS


def sobol_points(dim, n, skip=1):
    """First ``n`` Sobol' points in [0, 1)^dim after dropping ``skip`` rows."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    return SobolSequence(dim, skip).points(n)


@dataclass
class PickFreezeEstimate:
    """Pick-freeze estimates; ``closed`` maps subsets to Var[E[f | x_S]] / Var[f]."""

    variance: float
    mean: float
    closed: dict = field(default_factory=dict)
    first: np.ndarray | None = None
    total: np.ndarray | None = None
    evaluations: int = 0

    def sobol(self, S):
        """Interaction index sigma_S by inclusion-exclusion over closed indices."""
        S = tuple(sorted(S))
        out = 0.0
        for k in range(1, len(S) + 1):
            for T in combinations(S, k):
                if T not in self.closed:
                    raise KeyError(f"closed index for {T} was not estimated")
                out += (-1) ** (len(S) - k) * self.closed[T]
        return out


def pick_freeze_estimate(model, families, n, subsets=(), per_variable=True, skip=1):
    """Pick-freeze estimator with centered products.

    Two point blocks A and B come from a 2d-dimensional Sobol' sequence.
    For a subset T the hybrid C_T takes the T columns from A and the rest
    from B; Cov[f(A), f(C_T)] estimates Var[E[f | x_T]].  Totals use the
    complementary freeze, sigma_hat_i = 1 - V_{-i} / V.  With
    ``per_variable`` the cost is 2(d + 1) n model evaluations, plus n per
    extra closed subset needed by ``subsets``.
    """
    d = len(families)
    if n < 2:
        raise ConfigError("pick-freeze needs n >= 2")
    U = sobol_points(2 * d, n, skip)
    A = uniform_to_inputs(families, U[:, :d])
    B = uniform_to_inputs(families, U[:, d:])
    yA = np.asarray(model(A), dtype=float)
    yB = np.asarray(model(B), dtype=float)
    evals = 2 * n
    both = np.concatenate([yA, yB])
    mu = float(both.mean())
    V = float(np.mean((both - mu) ** 2))
    if V <= 1e-14 * max(1.0, mu * mu):
        raise ZeroVarianceError("model output has zero variance on the sample")

    cache = {}

    def closed(T):
        nonlocal evals
        T = tuple(sorted(T))
        if T not in cache:
            if len(T) == d:
                cache[T] = V
            else:
                C = B.copy()
                C[:, list(T)] = A[:, list(T)]
                yC = np.asarray(model(C), dtype=float)
                evals += n
                cache[T] = float(np.mean((yA - mu) * (yC - mu)))
        return cache[T]

    est = PickFreezeEstimate(V, mu)
    for S in subsets:
        S = tuple(sorted({int(v) for v in S}))
        if any(v < 0 or v >= d for v in S):
            raise ConfigError(f"subset {S} outside 0..{d - 1}")
        for k in range(1, len(S) + 1):
            for T in combinations(S, k):
                closed(T)
    if per_variable:
        est.first = np.array([closed((i,)) for i in range(d)]) / V
        rest = [tuple(j for j in range(d) if j != i) for i in range(d)]
        est.total = np.array([1.0 - closed(T) / V if T else 1.0 for T in rest])
    est.closed = {T: v / V for T, v in cache.items()}
    est.evaluations = evals
    return est


def pick_freeze(model, families, S, n, skip=1):
    """Return (sigma_S, per-variable total indices) from one pick-freeze run."""
    est = pick_freeze_estimate(model, families, n, subsets=[S], per_variable=True, skip=skip)
    return est.sobol(S), est.total
