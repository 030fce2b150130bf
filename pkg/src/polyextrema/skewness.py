"""Skewness (third central moment) sensitivity indices of a polynomial surrogate.

The third central moment of ``g = p - E[p]`` splits over ordered triples of
nonconstant basis terms; each triple is credited to the union of the
variables it involves.  Two backends compute the triple expectations:

* ``explicit`` forms the weighted evaluation matrix ``E_w`` (row ``i`` holds
  ``alpha_i Psi_i`` at every quadrature point) and uses dot products;
* ``tensor`` exploits a tensor rule: ``E[Psi_a Psi_b Psi_c]`` factors into
  per-dimension triple products of the 1-D rules, so the M-point grid is
  never materialized.

Both integrate with the same rule and agree to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SymmetricOutputError
from .orthobasis import QuadratureRule, design_matrix, tensor_rule
from .pce import _require_full_space

SYMMETRY_TOL = 1e-12
MAX_TERMS = 2000
EXPLICIT_CELLS = 2 * 10**7
DIRECT_MOMENT_CELLS = 5 * 10**8
TENSOR_CELLS = 5 * 10**7


@dataclass
class SkewnessWorkspace:
    surrogate: object
    rule: QuadratureRule
    mode: str
    mean: float
    sigma: float
    mu3: float
    gamma: float
    E_w: np.ndarray | None = None
    f_tilde: np.ndarray | None = None
    tables: list | None = field(default=None, repr=False)
    moment_route: str = "quadrature"

    @property
    def indices(self):
        return self.surrogate.index_set.indices

    @property
    def alpha(self):
        a = self.surrogate.coefficients.copy()
        a[0] = 0.0
        return a

    @property
    def symmetric(self):
        return abs(self.gamma) < SYMMETRY_TOL

    @property
    def dim(self):
        return self.surrogate.dim

    def normalized_multi_index(self, S):
        jbar = np.zeros(self.dim, dtype=int)
        jbar[list(S)] = 1
        return jbar

    def triple(self, a, B, C):
        """E[g_a g_b g_c] for one ``a`` against index arrays ``B``, ``C``."""
        B = np.asarray(B, dtype=np.int64)
        C = np.asarray(C, dtype=np.int64)
        if self.mode == "explicit":
            ea = self.E_w[a] * self.rule.weights
            out = np.empty(len(B))
            step = max(1, EXPLICIT_CELLS // max(1, self.E_w.shape[1]))
            for s in range(0, len(B), step):
                b, c = B[s:s + step], C[s:s + step]
                out[s:s + step] = (self.E_w[b] * self.E_w[c]) @ ea
            return out
        alpha, I = self.alpha, self.indices
        val = alpha[a] * alpha[B] * alpha[C]
        for k, T in enumerate(self.tables):
            val = val * T[I[a, k], I[B, k], I[C, k]]
        return val


def required_points(iset):
    """Per-dimension Gauss points making triple products of the basis exact."""
    top = iset.indices.max(axis=0)
    return [max(1, math.ceil((3 * int(p) + 1) / 2)) for p in top]


def adequate_rule(s):
    """Smallest isotropic tensor rule integrating cubes of the surrogate exactly."""
    level = max(required_points(s.index_set)) - 1
    return tensor_rule(s.families, level)


def build_workspace(s, quad=None, mode="auto"):
    """Evaluate moments and prepare triple-product expectations.

    ``quad`` defaults to the smallest adequate tensor rule.  Tensor rules
    are checked for exactness on degree-3p integrands.
    """
    _require_full_space(s)
    if len(s.index_set) > MAX_TERMS:
        raise ConfigError(f"basis of {len(s.index_set)} terms exceeds the skewness cap {MAX_TERMS}")
    quad = adequate_rule(s) if quad is None else quad
    if quad.dim != s.dim:
        raise ConfigError("quadrature dimension does not match the surrogate")
    if quad.factors is not None:
        have = [len(w) for _, w in quad.factors]
        need = required_points(s.index_set)
        if any(h < n for h, n in zip(have, need)):
            raise ConfigError(f"quadrature too coarse for cubic moments: have {have} points "
                              f"per dimension, need {need}")
    if mode == "auto":
        mode = "explicit" if len(s.index_set) * quad.size <= EXPLICIT_CELLS or quad.factors is None else "tensor"
    if mode == "tensor" and quad.factors is None:
        raise ConfigError("tensor backend needs a tensor quadrature rule")

    alpha = s.coefficients
    sigma = float(np.sum(alpha[1:] ** 2))
    mean = float(alpha[0])
    E_w = f_tilde = tables = None
    if mode == "explicit":
        E_w = (design_matrix(s.families, s.index_set, quad.points) * alpha[:, None].T).T
        f_tilde = E_w.sum(axis=0)
        mu3 = float(np.dot((f_tilde - mean) ** 3, quad.weights))
        route = "quadrature"
    else:
        tables = []
        top = s.index_set.indices.max(axis=0)
        for (pts, w), fam, p in zip(quad.factors, s.families, top):
            P = fam.evaluate(int(p), pts)
            tables.append(np.einsum("qa,qb,qc,q->abc", P, P, P, w))
        if quad.size * len(s.index_set) <= DIRECT_MOMENT_CELLS:
            mu3 = 0.0
            for pts, w in quad.chunks(max(1, EXPLICIT_CELLS // len(s.index_set))):
                g = design_matrix(s.families, s.index_set, pts) @ alpha - mean
                mu3 += float(np.dot(g**3, w))
            route = "quadrature"
        else:
            mu3, route = None, "tensor-transform"
    ws = SkewnessWorkspace(s, quad, mode, mean, sigma, 0.0, 0.0, E_w, f_tilde, tables, route)
    if mu3 is None:
        full = (1 << s.dim) - 1
        mu3 = float(_subset_cubes(ws)[full])
    ws.mu3 = mu3
    ws.gamma = mu3 / sigma**1.5 if sigma > 0 else 0.0
    return ws


def _bits(I):
    return (I > 0).astype(np.int64) @ (1 << np.arange(I.shape[1], dtype=np.int64))


def _require_skewed(w):
    if w.symmetric:
        raise SymmetricOutputError("symmetric output: skewness indices undefined (gamma ~ 0)")


def skewness_index(w, S, prune=True):
    """Skewness index of the variable subset ``S`` (zero-based)."""
    _require_skewed(w)
    S = tuple(sorted({int(v) for v in S}))
    if not S or any(v < 0 or v >= w.dim for v in S):
        raise ConfigError(f"subset {S} must be a nonempty subset of 0..{w.dim - 1}")
    I = w.indices
    bits = _bits(I)
    target = int(sum(1 << v for v in S))
    r = len(I)
    if prune:
        # O(r) pre-scan: terms touching variables outside S cannot contribute
        V = np.array([a for a in range(1, r) if bits[a] & ~target == 0], dtype=np.int64)
    else:
        V = np.arange(1, r, dtype=np.int64)
    if len(V) == 0:
        return 0.0

    # first sum: a = b = c
    sel = V[bits[V] == target]
    r1 = float(sum(w.triple(a, [a], [a])[0] for a in sel))

    # second sum: E[Psi_a^2 Psi_b], a != b
    r2 = 0.0
    for a in V:
        Bv = V[(V != a) & ((bits[a] | bits[V]) == target)]
        if prune:
            # a dimension where a is zero and b is not integrates to zero
            Bv = Bv[(bits[Bv] & ~bits[a]) == 0]
        if len(Bv):
            r2 += float(w.triple(a, np.full(len(Bv), a), Bv).sum())

    # third sum: a < b < c
    r3 = 0.0
    nV = len(V)
    for ia in range(nV - 2):
        a = V[ia]
        rest = V[ia + 1:]
        bi, ci = np.triu_indices(len(rest), k=1)
        Bv, Cv = rest[bi], rest[ci]
        keep = (bits[a] | bits[Bv] | bits[Cv]) == target
        if prune:
            keep &= _triple_selection(I, a, Bv, Cv)
        if keep.any():
            r3 += float(w.triple(a, Bv[keep], Cv[keep]).sum())
    return (r1 + 3.0 * r2 + 6.0 * r3) / w.mu3


def _triple_selection(I, a, B, C):
    """False where E[Psi_a Psi_b Psi_c] vanishes by orthogonality."""
    ia, ib, ic = I[a][None, :], I[B], I[C]
    nzc = (ia > 0).astype(int) + (ib > 0) + (ic > 0)
    lone = np.any(nzc == 1, axis=1)
    # two nonzero degrees in one dimension must match: E[psi_m psi_n] = delta_mn
    s = ia + ib + ic
    mx = np.maximum(np.maximum(ia, ib), ic)
    pair_mismatch = np.any((nzc == 2) & (s != 2 * mx), axis=1)
    return ~(lone | pair_mismatch)


def _all_numerators(w):
    """Unnormalized contributions of every variable subset in one pass."""
    I = w.indices
    bits = _bits(I)
    r = len(I)
    acc = {}
    for a in range(1, r):
        rest = np.arange(a, r)
        bi, ci = np.triu_indices(len(rest))
        Bv, Cv = rest[bi], rest[ci]
        keep = _triple_selection(I, a, Bv, Cv)
        Bv, Cv = Bv[keep], Cv[keep]
        if not len(Bv):
            continue
        vals = w.triple(a, Bv, Cv)
        mult = np.where((Bv == a) & (Cv == a), 1.0, np.where((Bv == a) | (Cv == Bv), 3.0, 6.0))
        keys = bits[a] | bits[Bv] | bits[Cv]
        uk, inv = np.unique(keys, return_inverse=True)
        sums = np.bincount(inv, weights=vals * mult)
        for k, v in zip(uk.tolist(), sums.tolist()):
            acc[k] = acc.get(k, 0.0) + v
    return acc


def _tensor_ready(w):
    if w.rule.factors is None:
        return False
    top = w.indices.max(axis=0) + 1
    grid = [len(p) for p, _ in w.rule.factors]
    return math.prod(int(t) for t in top) <= TENSOR_CELLS and math.prod(grid) <= TENSOR_CELLS


def _subset_cubes(w):
    """E[g_T^3] for every variable subset T (keyed by bitmask).

    g_T keeps the terms supported inside T.  Its values on the tensor grid
    of T's dimensions come from per-mode transforms of the dense
    coefficient tensor, so no design matrix is formed.
    """
    d = w.dim
    I = w.indices
    top = I.max(axis=0)
    C = np.zeros(tuple(int(t) + 1 for t in top))
    C[tuple(I.T)] = w.alpha
    evals = [fam.evaluate(int(p), pts) for (pts, _), fam, p in
             zip(w.rule.factors, w.surrogate.families, top)]
    weights = [wk for _, wk in w.rule.factors]
    out = np.zeros(1 << d)
    for mask in range(1, 1 << d):
        T = [k for k in range(d) if mask >> k & 1]
        vals = C[tuple(slice(None) if mask >> k & 1 else 0 for k in range(d))]
        if not vals.any():
            continue
        for axis, k in enumerate(T):
            vals = np.moveaxis(np.tensordot(vals, evals[k], axes=([axis], [1])), -1, axis)
        cube = vals**3
        for k in T:
            cube = np.tensordot(weights[k], cube, axes=([0], [0]))
        out[mask] = float(cube)
    return out


def _moebius(values, d):
    """Invert sums over subsets: out[S] = sum_{T subset S} (-1)^|S-T| values[T]."""
    f = np.array(values, dtype=float)
    for i in range(d):
        bit = 1 << i
        for mask in range(1 << d):
            if mask & bit:
                f[mask] -= f[mask ^ bit]
    return f


def skewness_indices(w, method="auto"):
    """All nonzero skewness indices, keyed by zero-based variable tuples.

    ``method`` is ``"subsets"`` (cubes of the partial sums g_T followed by
    Moebius inversion; needs a tensor rule), ``"triples"`` (direct triple
    sums grouped by variable union) or ``"auto"``.
    """
    _require_skewed(w)
    if method == "auto":
        method = "subsets" if _tensor_ready(w) else "triples"
    if method == "subsets":
        num = _moebius(_subset_cubes(w), w.dim)
        items = ((k, v) for k, v in enumerate(num) if k and v != 0.0)
    elif method == "triples":
        items = _all_numerators(w).items()
    else:
        raise ConfigError(f"unknown skewness method {method!r}")
    out = {}
    for key, v in items:
        S = tuple(k for k in range(w.dim) if key >> k & 1)
        out[S] = v / w.mu3
    return out


def total_skewness_indices(w, method="auto"):
    tot = np.zeros(w.dim)
    for S, v in skewness_indices(w, method).items():
        tot[list(S)] += v
    return tot


def total_skewness(w, i):
    if not 0 <= i < w.dim:
        raise ConfigError(f"variable {i} outside 0..{w.dim - 1}")
    return float(total_skewness_indices(w)[i])
