"""Command-line front end.

Commands: ``fit``, ``sensitivity``, ``compare``, ``bench`` and ``subspace``.
Settings are merged as defaults < JSON config file < environment
(``POLYEXTREMA_SEED``, ``POLYEXTREMA_THREADS``) < command-line flags, and the
resolved settings are written next to every output as ``<output>.config.json``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bench import MODELS, get_model, ridge_subspaces
from .errors import ConfigError, NumericalError, PolyExtremaError, SymmetricOutputError
from .orthobasis import Uniform, family_from_dict, index_set, tensor_rule
from .pce import (SampleSet, SensitivityReport, Surrogate, sobol_index, sobol_indices,
                  total_sobol_indices)
from .ridge import Subspace, estimate_subspace, load_subspace, polish_subspace, save_subspace

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
KINDS = ("sobol", "total", "skewness", "extremum")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class StudyConfig:
    command: str = ""
    model: str | None = None
    model_params: dict = field(default_factory=dict)
    data: str | None = None
    inputs: list | None = None
    method: str = "full"
    degree: int = 4
    subspace_dim: int = 2
    subspace: str | None = None
    samples: int = 100
    p_max: int = 4
    noise: float = 0.0
    seed: int = 0
    trials: int = 1
    threads: int = 0
    surrogate: str | None = None
    kind: str = "total"
    quadrature_level: int | None = None
    tail: str = "both"
    fraction: float = 0.05
    pool: str = "model"
    pool_size: int = 100_000
    pool_degree: int | None = None
    pool_samples: int | None = None
    extremum_degree: int = 3
    n_e: int | None = None
    n_u: int | None = None
    methods: list = field(default_factory=lambda: ["ridge", "lars", "qmc"])
    budgets: list = field(default_factory=lambda: [50, 100, 200, 400])
    subsets: list = field(default_factory=lambda: [[1, 3], [2, 4]])
    truth_level: int | None = None
    output: str | None = None

    _ints = ("degree", "subspace_dim", "samples", "p_max", "seed", "trials", "threads", "pool_size",
             "extremum_degree")
    _optional_ints = ("quadrature_level", "pool_degree", "pool_samples", "n_e", "n_u", "truth_level")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        for name in self._ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        for name in self._optional_ints:
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, np.integer))):
                raise ConfigError(f"{name} must be an integer or null, got {v!r}")
        if self.method not in ("full", "ridge", "lars", "qmc"):
            raise ConfigError(f"method must be one of full, ridge, lars, qmc; got {self.method!r}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {self.kind!r}")
        if self.tail not in ("both", "top", "bottom"):
            raise ConfigError("tail must be both, top or bottom")
        if self.pool not in ("model", "full", "ridge"):
            raise ConfigError("pool must be model, full or ridge")
        if self.degree < 0 or self.samples < 1 or self.trials < 1 or self.p_max < 1:
            raise ConfigError("degree must be >= 0; samples, trials and p_max must be >= 1")
        if self.threads < 1:
            self.threads = os.cpu_count() or 1
        if not 0.0 < float(self.fraction) < 0.5:
            raise ConfigError("fraction must lie in (0, 0.5)")
        if self.model is not None and self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(sorted(MODELS))}")
        if not isinstance(self.model_params, dict):
            raise ConfigError("model_params must be an object")
        if not isinstance(self.methods, list) or not isinstance(self.budgets, list):
            raise ConfigError("methods and budgets must be lists")
        for S in self.subsets:
            if not isinstance(S, list) or not S or any(not isinstance(v, int) or v < 1 for v in S):
                raise ConfigError(f"subsets are lists of 1-based variable numbers, got {S!r}")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return data


def resolve_config(args, command):
    data = {}
    if getattr(args, "config", None):
        data.update(load_config(args.config))
    env_seed, env_threads = os.environ.get("POLYEXTREMA_SEED"), os.environ.get("POLYEXTREMA_THREADS")
    try:
        if env_seed is not None:
            data["seed"] = int(env_seed)
        if env_threads is not None:
            data["threads"] = int(env_threads)
    except ValueError as exc:
        raise ConfigError(f"environment override is not an integer: {exc}") from None
    for key, value in vars(args).items():
        if key in ("config", "func", "cmd", "action") or value is None:
            continue
        data[key] = value
    data["command"] = command
    return StudyConfig.from_dict(data)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return "%.17g" % x if x != int(x) or abs(x) >= 1e16 else "%.1f" % x
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, Path):
        return json.dumps(str(x))
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent=0):
    """JSON text with floats fixed at 17 significant digits (byte-stable output)."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_fmt(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in seq) + "\n" + pad + "]"
    return _fmt(obj)


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def write_resolved(cfg, output):
    cfg.output = str(output)
    write_json(f"{output}.config.json", cfg.to_dict())


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else ("%.17g" % v if isinstance(v, float) else v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(map(str, k)): _jsonable(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# data


def read_dataset(path, inputs=None):
    """CSV with header ``x1..xd,f``; returns (SampleSet, families)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty dataset") from None
        rows = [r for r in reader if r]
    if "f" not in header:
        raise ConfigError(f"{path}: missing column 'f'")
    xcols = [h for h in header if h != "f"]
    d = len(xcols)
    for k in range(1, d + 1):
        if f"x{k}" not in header:
            raise ConfigError(f"{path}: missing column 'x{k}'")
    order = [header.index(f"x{k}") for k in range(1, d + 1)]
    try:
        arr = np.array([[float(r[i]) for i in order + [header.index("f")]] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row ({exc})") from None
    if arr.shape[0] == 0:
        raise ConfigError(f"{path}: no data rows")
    samples = SampleSet(arr[:, :d], arr[:, d])
    if inputs is not None:
        if len(inputs) != d:
            raise ConfigError(f"input spec lists {len(inputs)} variables but the data has {d}")
        fams = [family_from_dict(spec) for spec in inputs]
    else:
        lo, hi = samples.X.min(axis=0), samples.X.max(axis=0)
        if np.any(hi <= lo):
            raise ConfigError("cannot infer a uniform input spec from a constant column")
        fams = [Uniform(float(a), float(b)) for a, b in zip(lo, hi)]
    return samples, fams


def _model(cfg):
    if cfg.model is None:
        return None
    return get_model(cfg.model, **cfg.model_params)


def _subsets0(cfg):
    return [tuple(sorted(v - 1 for v in S)) for S in cfg.subsets]


# ---------------------------------------------------------------------------
# commands


def _fit_from_config(cfg, rng):
    from .study import draw_samples, fit_method

    model = _model(cfg)
    if cfg.method == "qmc":
        raise ConfigError("method qmc does not produce a surrogate; use `sensitivity --method qmc`")
    if cfg.data is not None:
        samples, fams = read_dataset(cfg.data, cfg.inputs)
        cfg.inputs = [f.to_dict() for f in fams]
    elif model is not None:
        samples, fams = draw_samples(model, cfg.samples, rng, cfg.noise), model.families
    else:
        raise ConfigError("a builtin model or a dataset is required")
    sub = load_subspace(cfg.subspace) if cfg.subspace else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = fit_method(fams, cfg.method, samples, cfg.degree, cfg.subspace_dim, cfg.p_max, rng, sub)
    s.diagnostics = _jsonable(dict(s.diagnostics))
    s.diagnostics["method"] = cfg.method
    if caught:
        s.diagnostics["warnings"] = sorted({str(w.message) for w in caught})
    return s


def cmd_fit(cfg):
    rng = np.random.default_rng(cfg.seed)
    s = _fit_from_config(cfg, rng)
    out = Path(cfg.output or "surrogate.json")
    write_json(out, _jsonable(s.to_dict()))
    write_resolved(cfg, out)
    msg = {"output": str(out), "coefficients": len(s.index_set), "method": cfg.method}
    if "lift_residual" in s.diagnostics:
        msg["lift_residual"] = s.diagnostics["lift_residual"]
    print(dumps(msg))
    return EXIT_OK


def _load_surrogate(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return Surrogate.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _names(cfg, d):
    model = _model(cfg)
    return model.names if model is not None else [f"x{i + 1}" for i in range(d)]


def _single_report(cfg, s, names):
    from .skewness import build_workspace, skewness_indices, total_skewness_indices

    if cfg.kind == "sobol":
        return SensitivityReport("sobol", sobol_indices(s), {}, names)
    if cfg.kind == "total":
        return SensitivityReport("total", {(i,): float(v) for i, v in enumerate(total_sobol_indices(s))},
                                 {}, names)
    quad = tensor_rule(s.families, cfg.quadrature_level) if cfg.quadrature_level is not None else None
    w = build_workspace(s, quad)
    meta = {"gamma": w.gamma, "mu3": w.mu3, "quadrature_points": w.rule.size}
    if w.symmetric:
        meta["status"] = "undefined (gamma~0)"
        return SensitivityReport("skewness", {}, meta, names)
    entries = dict(skewness_indices(w))
    for i, v in enumerate(total_skewness_indices(w)):
        entries[("total", i)] = float(v)
    return SensitivityReport("skewness", entries, meta, names)


def _skewness_report_dict(rep):
    first = {k: v for k, v in rep.entries.items() if k and k[0] != "total"}
    totals = {(k[1],): v for k, v in rep.entries.items() if k and k[0] == "total"}
    out = SensitivityReport("skewness", first, rep.metadata, rep.names).to_dict()
    out["totals"] = SensitivityReport("total-skewness", totals, {}, rep.names).to_dict()["entries"]
    return out


def _extremum_reports(cfg, model, fams, names, seed):
    from .extremum import extremum_pipeline, pool_surrogate

    pool = "model"
    if cfg.pool != "model":
        pd = cfg.pool_degree if cfg.pool_degree is not None else cfg.degree + 1
        ps = cfg.pool_samples or max(2 * math.comb(len(fams) + pd, pd), 100)
        pool = pool_surrogate(cfg.pool, model, fams, pd, ps, seed=[seed, 1],
                              subspace_dim=cfg.subspace_dim)
    tails = ("bottom", "top") if cfg.tail == "both" else (cfg.tail,)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = extremum_pipeline(model, fams, cfg.extremum_degree, pool, cfg.fraction, cfg.pool_size,
                                tails, cfg.n_e, cfg.n_u, [seed, 2], names)
    return {k: v[0] for k, v in out.items()}


def _qmc_report(cfg, model, kind, seed):
    from .qmc import pick_freeze_estimate

    n = max(2, cfg.samples // (2 * (model.dim + 1)))
    est = pick_freeze_estimate(model, model.families, n, per_variable=True)
    vals = est.total if kind == "total" else est.first
    return SensitivityReport(kind, {(i,): float(v) for i, v in enumerate(vals)},
                             {"evaluations": est.evaluations, "estimator": "pick-freeze"}, model.names)


def cmd_sensitivity(cfg):
    from .study import parallel_map

    model = _model(cfg)
    if cfg.surrogate is None and model is None and cfg.data is None:
        raise ConfigError("sensitivity needs --surrogate, --model or --data")
    if cfg.kind == "extremum" and model is None and cfg.surrogate is None:
        raise ConfigError("extremum indices need model access (--model) or a pool surrogate")
    if cfg.method == "qmc" and cfg.kind not in ("sobol", "total"):
        raise ConfigError("method qmc supports kinds sobol (first order) and total only")
    if cfg.method == "qmc" and model is None:
        raise ConfigError("method qmc needs a builtin model")

    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.trials)]

    def one(seed):
        if cfg.kind == "extremum":
            if model is not None:
                fams, names, mdl = model.families, model.names, model
            else:
                s = _load_surrogate(cfg.surrogate)
                fams, names = s.families, _names(cfg, s.dim)

                def mdl(X, s=s):
                    from .pce import evaluate
                    return evaluate(s, X)
            return _extremum_reports(cfg, mdl, fams, names, seed)
        if cfg.method == "qmc":
            return {"": _qmc_report(cfg, model, cfg.kind, seed)}
        if cfg.surrogate is not None and cfg.trials == 1:
            s = _load_surrogate(cfg.surrogate)
        else:
            if cfg.surrogate is not None:
                raise ConfigError("--trials needs a model or dataset to refit, not a stored surrogate")
            s = _fit_from_config(cfg, np.random.default_rng(seed))
        return {"": _single_report(cfg, s, _names(cfg, s.dim))}

    results = parallel_map(one, seeds, cfg.threads if cfg.kind != "extremum" else 1)
    out = Path(cfg.output or "report.json")
    doc = {"kind": cfg.kind, "trials": cfg.trials, "reports": {}}
    csv_rows = []
    for key in results[0]:
        reps = [r[key] for r in results]
        base = reps[0]
        if base.kind == "skewness":
            if base.metadata.get("status"):
                body = base.to_dict()
            else:
                mean = {k: float(np.mean([r.entries[k] for r in reps])) for k in base.entries}
                sd = ({k: float(np.std([r.entries[k] for r in reps], ddof=1)) for k in base.entries}
                      if cfg.trials > 1 else None)
                body = _skewness_report_dict(SensitivityReport("skewness", mean, base.metadata, base.names))
                if sd is not None:
                    body["sd"] = _jsonable({k: v for k, v in sd.items()})
                for k, v in mean.items():
                    if k and k[0] == "total":
                        csv_rows.append([key or "total-skewness", base.names[k[1]], v,
                                         None if sd is None else sd[k]])
        else:
            mean = {k: float(np.mean([r.entries.get(k, 0.0) for r in reps])) for k in base.entries}
            sd = ({k: float(np.std([r.entries.get(k, 0.0) for r in reps], ddof=1)) for k in base.entries}
                  if cfg.trials > 1 else None)
            rep = SensitivityReport(base.kind, mean, _jsonable(base.metadata), base.names, sd)
            body = rep.to_dict()
            for row in body["entries"]:
                csv_rows.append([key or base.kind, row["label"], row["mean"], row.get("sd")])
        doc["reports"][key or base.kind] = _jsonable(body)
    write_json(out, doc)
    write_csv(out.with_suffix(".csv"), ["report", "label", "mean", "sd"], csv_rows)
    write_resolved(cfg, out)
    print(dumps({"output": str(out), "csv": str(out.with_suffix(".csv"))}))
    return EXIT_OK


def cmd_compare(cfg):
    from .study import compare_methods, quadrature_truth

    model = _model(cfg)
    if model is None:
        raise ConfigError("compare needs a builtin --model")
    if not cfg.methods:
        raise ConfigError("method list is empty")
    subsets = _subsets0(cfg)
    for S in subsets:
        if max(S) >= model.dim:
            raise ConfigError(f"subset {[v + 1 for v in S]} exceeds the model dimension {model.dim}")
    truth_s = quadrature_truth(model, cfg.degree, cfg.truth_level)
    truth = {S: sobol_index(truth_s, S) for S in subsets}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = compare_methods(model, cfg.methods, cfg.budgets, subsets, truth, cfg.trials, cfg.seed,
                               cfg.degree, cfg.subspace_dim, cfg.p_max, cfg.noise, cfg.threads)
    out = Path(cfg.output or "compare.csv")
    write_csv(out, ["method", "budget", "subset", "truth", "mean_abs_error", "sd", "trials", "note"],
              [[r.method, r.budget, "-".join(str(v + 1) for v in r.subset), float(truth[r.subset]),
                r.mean_error, r.sd_error, r.trials, r.note] for r in rows])
    write_resolved(cfg, out)
    print(dumps({"output": str(out), "rows": len(rows)}))
    return EXIT_OK


def cmd_bench(cfg, spec=False, dump=None):
    model = _model(cfg)
    if model is None:
        raise ConfigError("bench needs a model name")
    if spec or not dump:
        text = dumps(_jsonable(model.spec()))
        if cfg.output:
            Path(cfg.output).write_text(text + "\n", encoding="utf-8")
            write_resolved(cfg, cfg.output)
        else:
            print(text)
        if not dump:
            return EXIT_OK
    rng = np.random.default_rng(cfg.seed)
    X = model.sample(dump, rng)
    f = model(X)
    rows = [list(map(float, x)) + [float(v)] for x, v in zip(X, f)]
    header = [f"x{i + 1}" for i in range(model.dim)] + ["f"]
    out = Path(cfg.output if cfg.output and not spec else f"{model.name}_samples.csv")
    write_csv(out, header, rows)
    write_resolved(cfg, out)
    print(dumps({"output": str(out), "rows": dump, "columns": len(header)}))
    return EXIT_OK


def cmd_subspace(cfg, action, csv_path=None):
    if action == "export":
        if cfg.surrogate is None:
            raise ConfigError("subspace export needs --surrogate")
        s = _load_surrogate(cfg.surrogate)
        M = s.subspace if s.is_ridge else s.diagnostics.get("ridge_subspace")
        if M is None:
            raise ConfigError("surrogate carries no ridge subspace")
        out = Path(cfg.output or "subspace.csv")
        save_subspace(out, np.asarray(M, dtype=float))
        print(dumps({"output": str(out), "shape": list(np.shape(M))}))
        return EXIT_OK
    if action == "import":
        if csv_path is None:
            raise ConfigError("subspace import needs a CSV path")
        sub = load_subspace(csv_path)
        info = {"d": sub.d, "n": sub.n, "orthonormality_error":
                float(np.abs(sub.M.T @ sub.M - np.eye(sub.n)).max())}
        model = _model(cfg)
        if model is not None and model.name == "analytical_ridge" and sub.n == 2:
            info["angle_to_true"] = sub.angle(ridge_subspaces()[0])
        print(dumps(info))
        return EXIT_OK
    # estimate
    from .study import draw_samples

    rng = np.random.default_rng(cfg.seed)
    model = _model(cfg)
    if cfg.data is not None:
        samples, fams = read_dataset(cfg.data, cfg.inputs)
    elif model is not None:
        samples, fams = draw_samples(model, cfg.samples, rng, cfg.noise), model.families
    else:
        raise ConfigError("subspace estimate needs --model or --data")
    sub = estimate_subspace(samples, cfg.subspace_dim, fams)
    sub = polish_subspace(samples, sub, cfg.degree, fams)
    out = Path(cfg.output or "subspace.csv")
    save_subspace(out, sub)
    write_resolved(cfg, out)
    print(dumps({"output": str(out), "shape": [sub.d, sub.n]}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _subset_list(text):
    try:
        return [[int(v) for v in part.split(",")] for part in text.split(";") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("subsets look like '1,3;2,4'") from None


def _common(p, model_positional=False):
    p.add_argument("--config", help="JSON configuration file")
    if not model_positional:
        p.add_argument("--model", help="builtin model name")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", dest="output", help="output path")


def _fit_args(p):
    p.add_argument("--data", help="CSV dataset with header x1..xd,f")
    p.add_argument("--method", choices=["full", "ridge", "lars", "qmc"])
    p.add_argument("--degree", type=int)
    p.add_argument("--subspace-dim", dest="subspace_dim", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--p-max", dest="p_max", type=int)
    p.add_argument("--s", dest="ridge_s", type=float, help="analytical_ridge parameter s")


def build_parser():
    parser = argparse.ArgumentParser(prog="polyextrema", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("fit", help="fit a surrogate and save it as JSON")
    _common(p)
    _fit_args(p)
    p.add_argument("--subspace", help="d x n CSV subspace for ridge fits")

    p = sub.add_parser("sensitivity", help="Sobol', total, skewness or extremum indices")
    _common(p)
    _fit_args(p)
    p.add_argument("--surrogate", help="stored surrogate JSON")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--trials", type=int)
    p.add_argument("--quadrature-level", dest="quadrature_level", type=int)
    p.add_argument("--tail", choices=["both", "top", "bottom"])
    p.add_argument("--fraction", type=float)
    p.add_argument("--pool", choices=["model", "full", "ridge"])
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--pool-degree", dest="pool_degree", type=int)
    p.add_argument("--pool-samples", dest="pool_samples", type=int)
    p.add_argument("--extremum-degree", dest="extremum_degree", type=int)
    p.add_argument("--n-e", dest="n_e", type=int)
    p.add_argument("--n-u", dest="n_u", type=int)

    p = sub.add_parser("compare", help="index error versus budget for several methods")
    _common(p)
    _fit_args(p)
    p.add_argument("--methods", type=_str_list)
    p.add_argument("--budgets", type=_int_list)
    p.add_argument("--subsets", type=_subset_list, help="1-based, e.g. '1,3;2,4'")
    p.add_argument("--trials", type=int)
    p.add_argument("--truth-level", dest="truth_level", type=int)

    p = sub.add_parser("bench", help="benchmark model spec and sample dumps")
    p.add_argument("model", help="builtin model name")
    _common(p, model_positional=True)
    p.add_argument("--spec", action="store_true", help="print the input specification as JSON")
    p.add_argument("--dump", type=int, help="number of samples to write as CSV")
    p.add_argument("--s", dest="ridge_s", type=float)

    p = sub.add_parser("subspace", help="estimate, export or import d x n subspace CSV files")
    p.add_argument("action", choices=["estimate", "export", "import"])
    p.add_argument("csv", nargs="?", help="CSV file for import")
    _common(p)
    _fit_args(p)
    p.add_argument("--surrogate")
    return parser


def _run(args):
    extra = {}
    if args.cmd == "bench":
        extra = {"spec": args.spec, "dump": args.dump}
        del args.spec, args.dump
    if args.cmd == "subspace":
        extra = {"action": args.action, "csv_path": args.csv}
        del args.csv
    ridge_s = getattr(args, "ridge_s", None)
    if hasattr(args, "ridge_s"):
        del args.ridge_s
    cfg = resolve_config(args, args.cmd)
    if ridge_s is not None:
        cfg.model_params = {**cfg.model_params, "s": ridge_s}
    if cfg.command == "fit":
        return cmd_fit(cfg)
    if cfg.command == "sensitivity":
        return cmd_sensitivity(cfg)
    if cfg.command == "compare":
        return cmd_compare(cfg)
    if cfg.command == "bench":
        return cmd_bench(cfg, **extra)
    return cmd_subspace(cfg, **extra)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except SymmetricOutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PolyExtremaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
