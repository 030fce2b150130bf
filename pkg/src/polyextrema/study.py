"""Fitting recipes, repeated trials and method comparisons shared by the CLI and tests."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConfigError, NumericalError
from .orthobasis import index_set, sample_inputs, tensor_rule
from .pce import SampleSet, fit_least_squares, fit_quadrature, sobol_index, total_sobol_indices
from .qmc import pick_freeze_estimate
from .ridge import estimate_subspace, fit_ridge, lift_coefficients, polish_subspace
from .sparse import adaptive_lars_fit

METHODS = ("full", "ridge", "lars", "qmc")


def parallel_map(fn, items, threads=1):
    """Ordered map; ``threads > 1`` runs items on a thread pool."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def draw_samples(model, n, rng, noise=0.0):
    X = sample_inputs(model.families, n, rng)
    f = model(X)
    if noise:
        f = f + noise * rng.standard_normal(n)
    return SampleSet(X, f)


def fit_ridge_surrogate(samples, families, subspace_dim, degree, subspace=None, polish=True,
                        lift=True, rng=None):
    """Subspace estimate (OPG, then residual polishing), ridge fit, and optional lift."""
    if subspace is None:
        subspace = estimate_subspace(samples, subspace_dim, families)
        if polish:
            subspace = polish_subspace(samples, subspace, degree, families)
    ridge = fit_ridge(samples, subspace, degree, families, grid="total-order")
    if not lift:
        return ridge
    full = index_set("total-order", len(families), degree)
    lifted = lift_coefficients(ridge, full, rng=rng)
    lifted.diagnostics["ridge_subspace"] = ridge.subspace.tolist()
    return lifted


def fit_method(model, method, samples, degree=4, subspace_dim=2, p_max=4, rng=None, subspace=None):
    """Full-space surrogate from ``samples`` with the named method."""
    fams = model.families if hasattr(model, "families") else model
    if method == "full":
        return fit_least_squares(fams, index_set("total-order", len(fams), degree), samples)
    if method == "ridge":
        return fit_ridge_surrogate(samples, fams, subspace_dim, degree, subspace=subspace, rng=rng)
    if method == "lars":
        return adaptive_lars_fit(samples, fams, p_max)
    raise ConfigError(f"unknown fitting method {method!r}; choose from full, ridge, lars")


def method_floor(method, d, degree=4, subspace_dim=2, subsets=()):
    """Smallest sample budget a method can use."""
    if method == "full":
        return math.comb(d + degree, degree)
    if method == "ridge":
        return max(math.comb(subspace_dim + degree, degree) + 1, max(2 * d, 20))
    if method == "lars":
        return 2
    if method == "qmc":
        return 2 * qmc_cost_per_point(subsets)
    raise ConfigError(f"unknown method {method!r}")


def qmc_cost_per_point(subsets):
    closed = set()
    for S in subsets:
        S = tuple(sorted(S))
        for k in range(1, len(S) + 1):
            closed.update(combinations(S, k))
    return 2 + len(closed)


def quadrature_truth(model, degree, level=None):
    """Spectral projection on a tensor Gauss rule; exact for polynomial models of this degree."""
    level = degree if level is None else level
    rule = tensor_rule(model.families, level)
    return fit_quadrature(model, model.families, index_set("total-order", model.dim, degree), rule)


def estimate_indices(model, method, budget, subsets, rng, degree=4, subspace_dim=2, p_max=4, noise=0.0):
    """Sobol' indices of ``subsets`` from one trial of ``method`` at this evaluation budget."""
    if method == "qmc":
        n = budget // qmc_cost_per_point(subsets)
        est = pick_freeze_estimate(model, model.families, n, subsets=subsets, per_variable=False)
        return {tuple(S): est.sobol(S) for S in subsets}
    samples = draw_samples(model, budget, rng, noise)
    s = fit_method(model, method, samples, degree, subspace_dim, p_max, rng)
    return {tuple(S): sobol_index(s, S) for S in subsets}


@dataclass
class ComparisonRow:
    method: str
    budget: int
    subset: tuple
    mean_error: float | None
    sd_error: float | None
    trials: int
    note: str = ""


def compare_methods(model, methods, budgets, subsets, truth, trials=30, seed=0, degree=4,
                    subspace_dim=2, p_max=4, noise=0.0, threads=1):
    """Mean absolute index error per method and budget (QMC is deterministic: one trial)."""
    if not methods:
        raise ConfigError("method list is empty")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    subsets = [tuple(sorted(S)) for S in subsets]
    rows = []
    for method in methods:
        for budget in budgets:
            floor = method_floor(method, model.dim, degree, subspace_dim, subsets)
            if budget < floor:
                for S in subsets:
                    rows.append(ComparisonRow(method, budget, S, None, None, 0,
                                              f"skipped: budget below floor {floor}"))
                continue
            n_trials = 1 if method == "qmc" else trials
            seeds = np.random.SeedSequence([seed, budget, METHODS.index(method)]).spawn(n_trials)

            def one(ss, method=method, budget=budget):
                rng = np.random.default_rng(ss)
                try:
                    est = estimate_indices(model, method, budget, subsets, rng, degree, subspace_dim,
                                           p_max, noise)
                except NumericalError as exc:
                    return exc
                return {S: abs(est[S] - truth[S]) for S in subsets}

            results = parallel_map(one, seeds, threads)
            good = [r for r in results if not isinstance(r, Exception)]
            failed = len(results) - len(good)
            note = f"{failed} trials failed numerically" if failed else ""
            for S in subsets:
                errs = np.array([r[S] for r in good])
                rows.append(ComparisonRow(method, budget, S,
                                          float(errs.mean()) if errs.size else None,
                                          float(errs.std(ddof=1)) if errs.size > 1 else None,
                                          len(good), note))
    return rows


@dataclass
class TrialSummary:
    mean: dict
    sd: dict
    trials: int
    samples: list = field(default_factory=list)


def run_trials(fn, trials, seed=0, threads=1):
    """Call ``fn(rng)`` for seeded repeats and summarize the returned dicts."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(trials)
    out = parallel_map(lambda ss: fn(np.random.default_rng(ss)), seeds, threads)
    keys = list(out[0])
    mean = {k: float(np.mean([o[k] for o in out])) for k in keys}
    sd = {k: float(np.std([o[k] for o in out], ddof=1)) if trials > 1 else 0.0 for k in keys}
    return TrialSummary(mean, sd, trials, out)


def total_indices_trial(model, method, n, degree, subspace_dim=2, p_max=4):
    def fn(rng):
        s = fit_method(model, method, draw_samples(model, n, rng), degree, subspace_dim, p_max, rng)
        return {(i,): float(v) for i, v in enumerate(total_sobol_indices(s))}

    return fn
