"""Command-line interface: ``rocinfer {simulate,fit,band,compare,demo}``.

Every command prints one JSON object to stdout carrying ``version``,
``seed`` and ``run_id``. Failures print ``{"error": {...}}`` and exit 1;
malformed flags exit 2. Output files are never overwritten: if a target
exists, a numbered variant of the prefix is used and reported.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _rng
from .auc import compare_models, table2_bootstrap
from .bands import bootstrap_band, horizontal_band, vertical_band
from .data import Dataset, load_csv, split
from .errors import RocInferError
from .models import ModelRecipe
from .scenarios import (KINDS, ScenarioSpec, analytic_roc, generate, jensen_demo, lemma1_demo,
                        lemma2_demo, lemma3_demo, lemma4_demo, lemma5_demo)

LEMMAS = ("1", "2", "3", "4", "5", "jensen")


# ---------------------------------------------------------------- argument types

def _level(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"level must lie in (0,1), got {v}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _grid(text):
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            a, b, s = (float(t) for t in text.split(":"))
            vals = np.round(np.arange(a, b + s / 2, s), 10)
        else:
            vals = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if len(vals) == 0 or np.any(vals <= 0) or np.any(vals >= 1):
        raise argparse.ArgumentTypeError("grid values must lie in (0,1)")
    return sorted(set(vals.tolist()))


def _model(text):
    """``logit`` | ``max-auc``, optionally ``:feat1,feat2``."""
    kind, _, feats = text.partition(":")
    kinds = {"logit": "logit_mle", "max-auc": "max_auc"}
    if kind not in kinds:
        raise argparse.ArgumentTypeError(f"model must be logit or max-auc, got {kind!r}")
    return kinds[kind], tuple(f for f in feats.split(",") if f) or None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rocinfer", description="Inference for ROC curves and AUC.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="data CSV")
        p.add_argument("--out", help="output path prefix")
        p.add_argument("--seed", type=int, help="master seed (random if omitted)")

    p = sub.add_parser("simulate", help="draw a scenario dataset")
    common(p, needs_input=False)
    p.add_argument("--kind", required=True, choices=[k for k in KINDS if k != "custom"])
    p.add_argument("--n", type=_positive_int, required=True)

    p = sub.add_parser("fit", help="fit a propensity model")
    common(p)
    p.add_argument("--model", type=_model, default=("logit_mle", None))
    p.add_argument("--fix-intercept", action="store_true", help="fix the intercept at 0")

    p = sub.add_parser("band", help="pointwise ROC confidence band")
    common(p)
    p.add_argument("--model", type=_model, default=("logit_mle", None))
    p.add_argument("--fix-intercept", action="store_true")
    p.add_argument("--method", choices=("analytic", "bootstrap"), default="analytic")
    p.add_argument("--grid", type=_grid, default=_grid("0.05:0.95:0.05"))
    p.add_argument("--level", type=_level, default=0.95)
    p.add_argument("--B", type=_positive_int, default=1000)
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--in-sample", action="store_true",
                   help="fit and evaluate on all rows instead of a 1:1 split")

    p = sub.add_parser("compare", help="compare the AUCs of two models")
    common(p)
    p.add_argument("--model", type=_model, action="append", required=True,
                   help="give twice, e.g. --model logit:x1 --model logit:x2")
    p.add_argument("--fix-intercept", action="store_true")
    p.add_argument("--B", type=_positive_int, default=0, help="bootstrap replicates (0 = none)")
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--alternative", choices=("two-sided", "greater", "less"),
                   default="two-sided")

    p = sub.add_parser("demo", help="scenario demonstrations")
    common(p, needs_input=False)
    p.add_argument("--lemma", required=True, choices=LEMMAS)
    p.add_argument("--n", type=_positive_int, help="draws or sample size")
    return ap


# ---------------------------------------------------------------- output helpers

def _run_id(args) -> str:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "out"}
    blob = json.dumps(flags, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _reserve(prefix: str | None, suffixes) -> str | None:
    """First of ``prefix``, ``prefix.1``, ... whose output files are all absent."""
    if prefix is None:
        return None
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    k = 0
    while True:
        base = prefix if k == 0 else f"{prefix}.{k}"
        if not any(os.path.exists(base + s) for s in suffixes):
            return base
        k += 1


def _write_json(path, obj):
    with open(path, "x") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _clean(obj):
    """Replace non-finite floats so output stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.ndarray, np.generic)):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _recipe(model, fix_intercept) -> ModelRecipe:
    kind, feats = model
    return ModelRecipe(kind, feats, fix_intercept_zero=fix_intercept)


def _halves(data: Dataset, seed: int):
    if data.split is not None and not np.isnan(data.split).any():
        return (data.subset(np.flatnonzero(data.split == 1)),
                data.subset(np.flatnonzero(data.split == 0)))
    return split(data, 0.5, seed)


def _curve_csv(path, alpha, *cols, names):
    with open(path, "x", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(alpha, *cols):
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------- commands

def cmd_simulate(args, meta):
    if args.out is None:
        raise ValueError("simulate needs --out")
    sim = generate(ScenarioSpec(args.kind, args.n, args.seed))
    base = _reserve(args.out, (".csv", ".json"))
    side = sim.save(base + ".csv")
    return {**meta, "files": [base + ".csv", side], "n": sim.data.n,
            "columns": ["y"] + (["d"] if sim.data.d is not None else [])
            + list(sim.data.feature_names),
            "prevalence": float(sim.data.y.mean())}


def cmd_fit(args, meta):
    data = load_csv(args.input)
    fit = _recipe(args.model, args.fix_intercept).fit(data, seed=args.seed)
    out = {**meta, **fit.to_dict(), "param_names": list(fit.param_names),
           "std_errors": fit.std_errors.tolist()}
    base = _reserve(args.out, (".json",))
    if base:
        _write_json(base + ".json", _clean(out))
        out["files"] = [base + ".json"]
    return out


def cmd_band(args, meta):
    data = load_csv(args.input)
    recipe = _recipe(args.model, args.fix_intercept)
    if args.method == "analytic":
        if args.in_sample:
            fit = recipe.fit(data, seed=args.seed)
            band = vertical_band(data, fit, args.grid, args.level, in_sample=True)
        else:
            train, test = _halves(data, args.seed)
            band = vertical_band(test, recipe.fit(train, seed=args.seed), args.grid, args.level)
    else:
        band = bootstrap_band(data, recipe, args.B, args.grid, args.level, args.seed,
                              threads=args.threads)
    hb = horizontal_band(band)
    out = {**meta, **band.to_dict(), "seed": args.seed,
           "horizontal": {"beta": hb.beta_grid, "alpha_lower": hb.alpha_lower,
                          "alpha_upper": hb.alpha_upper}}
    base = _reserve(args.out, (".csv", ".json"))
    if base:
        band.to_csv(base + ".csv")
        out["files"] = [base + ".csv", base + ".json"]
        _write_json(base + ".json", _clean(out))
    return out


def cmd_compare(args, meta):
    if len(args.model) != 2:
        raise ValueError("compare needs exactly two --model flags")
    data = load_csv(args.input)
    r1, r2 = (_recipe(m, args.fix_intercept) for m in args.model)
    train, test = _halves(data, args.seed)
    res = compare_models(test, r1.fit(train, seed=args.seed), r2.fit(train, seed=args.seed),
                         alternative=args.alternative)
    out = {**meta, **res.to_dict(), "std": res.std_diff, "seed": args.seed}
    base = _reserve(args.out, (".json", ".replicates.csv"))
    if args.B > 0:
        boot = table2_bootstrap(data, r1, r2, args.B, args.seed, args.threads)
        out["bootstrap"] = boot["bootstrap"]
        out["theoretical"] = boot["theoretical"]
        out["B"] = args.B
        if base:
            _curve_csv(base + ".replicates.csv", np.arange(args.B), *boot["replicates"].T,
                       names=["replicate"] + boot["columns"])
        else:
            out["replicates"] = boot["replicates"]
    if base:
        out["files"] = [base + ".json"] + ([base + ".replicates.csv"] if args.B > 0 else [])
        _write_json(base + ".json", _clean(out))
    return out


def cmd_demo(args, meta):
    lemma, seed = args.lemma, args.seed
    curves = {}
    if lemma == "1":
        res = lemma1_demo()
        report = {k: {"violations": v["violations"]} for k, v in res.items()}
        curves = {k: (v["curve"].fpr, v["curve"].tpr) for k, v in res.items()}
    elif lemma == "2":
        r = lemma2_demo(draws=args.n or 10**6, seed=seed)
        report = r.to_dict()
        c = analytic_roc(ScenarioSpec("incentive_feature_cutoff", 1), 201)
        curves = {"optimal_roc": (c.fpr, c.tpr)}
    elif lemma == "3":
        r = lemma3_demo(n=args.n or 20000, seed=seed)
        report = {"identical_point_sets": r["identical_point_sets"]}
        curves = {"mroc": (r["mroc"].fpr, r["mroc"].tpr), "proc": (r["proc"].fpr, r["proc"].tpr)}
    elif lemma == "4":
        r = lemma4_demo(n=args.n or 10**5, seed=seed)
        report = r.to_dict()
        curves = {"proc_true_q": (r.proc_true_q.fpr, r.proc_true_q.tpr),
                  "proc_binned": (r.proc_binned.fpr, r.proc_binned.tpr),
                  "mroc": (r.mroc.fpr, r.mroc.tpr)}
    elif lemma == "5":
        r = lemma5_demo(draws=args.n or 10**6, seed=seed)
        report = r.to_dict()
        curves = {"roc_xu": (r.alpha_grid, r.roc_xu), "roc_x": (r.alpha_grid, r.roc_x)}
    else:
        r = jensen_demo()
        report = r.to_dict()
        c = analytic_roc(ScenarioSpec("misspecified_homogeneous", 1), 201)
        curves = {"curve": (c.fpr, c.tpr),
                  "points": ([p.fpr for p in r.points], [p.tpr for p in r.points])}
    out = {**meta, "lemma": lemma, "report": report}
    base = _reserve(args.out, (".json",) + tuple(f".{k}.csv" for k in curves))
    if base:
        files = []
        for name, (a, b) in curves.items():
            _curve_csv(f"{base}.{name}.csv", a, b, names=["fpr", "tpr"])
            files.append(f"{base}.{name}.csv")
        out["files"] = [base + ".json"] + files
        _write_json(base + ".json", _clean(out))
    return out


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "band": cmd_band,
            "compare": cmd_compare, "demo": cmd_demo}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None and "ROCINFER_THREADS" in os.environ \
            and hasattr(args, "threads"):
        args.threads = int(os.environ["ROCINFER_THREADS"])
    if args.seed is None:
        args.seed = _rng.auto_seed()
    meta = {"version": __version__, "command": args.command, "seed": args.seed,
            "run_id": _run_id(args)}
    try:
        out = COMMANDS[args.command](args, meta)
    except (RocInferError, ValueError, KeyError, OSError) as exc:
        err = {**meta, "error": {"type": type(exc).__name__, "message": str(exc).strip("'\"")}}
        print(json.dumps(err))
        return 1
    print(json.dumps(_clean(out), default=_jsonable, allow_nan=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
