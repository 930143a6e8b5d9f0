"""Command-line driver: ``ubknn {fit-eval,sweep,bench,oracle-check}``.

Every long option can also be set through an environment variable named
``UBKNN_<OPTION>`` (upper case, dashes as underscores); flags win over the
environment.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 failed oracle check.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, kdtree, selfcheck
from .dataset import (DataError, Dataset, PreprocessSpec, imbalance_ratio, load_csv,
                      stratified_kfold)
from .experiments import MethodSpec
from .generators import CubeSpec, TwoMoonsSpec, gen_cube, gen_two_moons
from .metrics import rows_to_csv, stopwatch

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ORACLE = 0, 2, 3, 4
ENV_PREFIX = "UBKNN_"


class ConfigError(ValueError):
    pass


def parse_int_list(text: str) -> list[int]:
    """``"1,2,5"`` or ``"1-30"`` or a mix such as ``"1-5,10,20"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(float(part)))
    if not out:
        raise ConfigError(f"empty list {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise ConfigError(f"empty list {text!r}")
    return vals


def parse_synth(text: str) -> tuple[str, dict]:
    """``moons:n_major=20000,n_minor=200,noise=0.2`` or ``cube:d=2,n=4000,pi=0.95/0.05``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    opts: dict = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, _, value = item.partition("=")
        opts[key.strip()] = value.strip()
    if kind == "moons":
        allowed = {"n_major", "n_minor", "noise", "test_major", "test_minor"}
    elif kind == "cube":
        allowed = {"d", "n", "pi", "amplitude", "test_n"}
    else:
        raise ConfigError(f"unknown synthetic source {kind!r}; use 'moons' or 'cube'")
    unknown = set(opts) - allowed
    if unknown:
        raise ConfigError(f"unknown {kind} option(s): {', '.join(sorted(unknown))}")
    return kind, opts


def make_synth(kind: str, opts: dict, seed: int, test: bool = False) -> Dataset:
    if kind == "moons":
        n_major = int(float(opts.get("n_major", 20000)))
        n_minor = int(float(opts.get("n_minor", 200)))
        if test:
            n_major = int(float(opts.get("test_major", 10 * n_major)))
            n_minor = int(float(opts.get("test_minor", 10 * n_minor)))
        return gen_two_moons(TwoMoonsSpec(n_major, n_minor, float(opts.get("noise", 0.2)), seed))
    pi = tuple(float(v) for v in opts.get("pi", "0.95/0.05").split("/"))
    n = int(float(opts.get("n", 4000)))
    if test:
        n = int(float(opts.get("test_n", 10 * n)))
    spec = CubeSpec(d=int(opts.get("d", 2)), n=n, pi=pi,
                    amplitude=float(opts.get("amplitude", 0.45)), seed=seed)
    return gen_cube(spec)[0]


def _env_default(name: str, fallback):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), fallback)


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", default=_env_default("data", None), help="CSV file")
    src.add_argument("--synth", default=_env_default("synth", None),
                     help="synthetic source, e.g. 'moons:n_major=20000,n_minor=200'")
    p.add_argument("--label-column", default=_env_default("label-column", "-1"),
                   help="label column name or index (default: last)")
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    p.add_argument("--threads", type=int, default=int(_env_default("threads", 1)))
    p.add_argument("--out", default=_env_default("out", None), help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=_env_default("format", "json"))


def _add_method(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=experiments.METHODS, default=_env_default("method", "underbag-knn"))
    p.add_argument("--k", type=int, default=_int_or_none(_env_default("k", None)),
                   help="neighbours; omit to tune by cross-validation")
    p.add_argument("--k-grid", default=_env_default("k-grid", "1-30"))
    p.add_argument("--rounds", type=int, default=int(_env_default("rounds", 5)), help="bagging rounds B")
    p.add_argument("--s-frac", type=float, default=float(_env_default("s-frac", 1.0)),
                   help="s = s_frac * M * n_min")
    p.add_argument("--s", type=float, default=_float_or_none(_env_default("s", None)),
                   help="absolute expected subsample size (overrides --s-frac)")
    p.add_argument("--auto-params", action="store_true",
                   default=_truthy(_env_default("auto-params", "")))
    p.add_argument("--alpha", type=float, default=float(_env_default("alpha", 1.0)))


def _int_or_none(v):
    return None if v in (None, "") else int(v)


def _float_or_none(v):
    return None if v in (None, "") else float(v)


def _truthy(v) -> bool:
    return str(v).lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ubknn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-eval", help="repeated stratified cross-validation of one method")
    _add_common(p)
    _add_method(p)
    p.add_argument("--folds", type=int, default=int(_env_default("folds", 10)))
    p.add_argument("--repeats", type=int, default=int(_env_default("repeats", 2)))
    p.add_argument("--tune-folds", type=int, default=int(_env_default("tune-folds", 5)))

    p = sub.add_parser("sweep", help="AM over a grid of B, k and s_frac")
    _add_common(p)
    p.add_argument("--rounds-grid", default=_env_default("rounds-grid", "1,2,5,10,20,50"))
    p.add_argument("--k-grid", default=_env_default("k-grid", "1-30"))
    p.add_argument("--s-frac-grid", default=_env_default("s-frac-grid", "1.0"))
    p.add_argument("--repeats", type=int, default=int(_env_default("repeats", 3)))
    p.add_argument("--folds", type=int, default=int(_env_default("folds", 5)),
                   help="folds for CSV data (synthetic data draws a fresh test set)")

    p = sub.add_parser("bench", help="fit/predict timing of standard vs under-bagging k-NN")
    p.add_argument("--n-grid", default=_env_default("n-grid", "10000,30000,100000,300000"))
    p.add_argument("--rho", type=float, default=float(_env_default("rho", 0.03)))
    p.add_argument("--queries", type=int, default=int(_env_default("queries", 20000)))
    p.add_argument("--k", type=int, default=int(_env_default("k", 10)))
    p.add_argument("--rounds", type=int, default=int(_env_default("rounds", 1)))
    p.add_argument("--s-frac", type=float, default=float(_env_default("s-frac", 1.0)))
    p.add_argument("--repeats", type=int, default=int(_env_default("repeats", 3)))
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    p.add_argument("--threads", type=int, default=int(_env_default("threads", 1)))
    p.add_argument("--out", default=_env_default("out", None))
    p.add_argument("--format", choices=("json", "csv"), default=_env_default("format", "json"))

    p = sub.add_parser("oracle-check", help="run the oracle-versus-implementation checks")
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    return parser


def _load_source(args) -> tuple[Dataset | None, tuple[str, dict] | None]:
    if args.data:
        label = args.label_column
        label = int(label) if str(label).lstrip("-").isdigit() else label
        # scaling happens per fold, from training statistics
        return load_csv(args.data, label, PreprocessSpec(scaling="none")), None
    if args.synth:
        return None, parse_synth(args.synth)
    raise ConfigError("one of --data or --synth is required")


def _set_threads(n: int) -> None:
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _write(args, payload: dict, rows: list[dict]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n" if args.format == "json" else rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _method_spec(args) -> MethodSpec:
    return MethodSpec(
        method=args.method,
        k=args.k,
        B=args.rounds,
        s_frac=args.s_frac,
        s=args.s,
        k_grid=tuple(parse_int_list(args.k_grid)),
        tune_folds=args.tune_folds,
        auto_params=args.auto_params,
        alpha=args.alpha,
        parallel=args.threads > 1,
    )


def _split_timings(d: dict) -> tuple[dict, dict]:
    timings = {k: v for k, v in d.items() if "_seconds" in k}
    return {k: v for k, v in d.items() if "_seconds" not in k}, timings


def cmd_fit_eval(args) -> int:
    spec = _method_spec(args)
    ds, synth = _load_source(args)
    if ds is None:
        kind, opts = synth
        ds = make_synth(kind, opts, args.seed)
    result = experiments.cross_validate(ds, spec, args.folds, args.repeats, args.seed, scale=True)
    folds, timings = [], []
    for row, rep in zip(result.rows, result.reports):
        body, t = _split_timings({**rep.to_dict(), "repeat": row["repeat"], "fold": row["fold"]})
        t["tune_seconds"] = body.pop("tune_seconds", None)
        folds.append(body)
        timings.append(t)
    summary, summary_t = _split_timings(result.summary())
    payload = {
        "command": "fit-eval",
        "config": {**vars(args), "method_spec": {**vars(spec), "k_grid": list(spec.k_grid)}},
        "provenance": experiments.provenance({"dataset_fingerprint": ds.fingerprint(),
                                              "n": ds.n, "d": ds.d, "n_classes": ds.n_classes,
                                              "class_counts": ds.class_counts.tolist(),
                                              "imbalance_ratio": imbalance_ratio(ds)}),
        "folds": folds,
        "summary": summary,
        "timings": {"folds": timings, "summary": summary_t},
    }
    rows = [dict(r) for r in result.rows]
    rows.append({"repeat": "mean", "fold": "", "method": spec.method, "k": "",
                 **{k.removesuffix("_mean"): v for k, v in result.summary().items() if k.endswith("_mean")}})
    rows.append({"repeat": "sd", "fold": "", "method": spec.method, "k": "",
                 **{k.removesuffix("_sd"): v for k, v in result.summary().items() if k.endswith("_sd")}})
    _write(args, payload, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    Bs = parse_int_list(args.rounds_grid)
    ks = parse_int_list(args.k_grid)
    fracs = parse_float_list(args.s_frac_grid)
    if min(Bs) < 1 or min(ks) < 1 or not all(0 < a <= 1 for a in fracs):
        raise ConfigError("grid values out of range")
    ds, synth = _load_source(args)
    runs = []
    for r in range(args.repeats):
        if ds is None:
            kind, opts = synth
            seed = experiments.derive_seed(args.seed, r)
            runs.append((make_synth(kind, opts, seed), make_synth(kind, opts, seed + 1, test=True)))
        else:
            for tr, te in stratified_kfold(ds, args.folds, experiments.derive_seed(args.seed, r)):
                runs.append(experiments.scaled_split(ds, tr, te, True))
    rows = []
    for a in fracs:
        grids = []
        for i, (train, test) in enumerate(runs):
            s = a * train.n_classes * train.minority_count
            grids.append(experiments.bagging_sweep(train, test, Bs, ks, max(1.0, s),
                                                   experiments.derive_seed(args.seed, 7, i)))
        grids = np.stack(grids)
        for bi, B in enumerate(sorted(Bs)):
            for ki, k in enumerate(ks):
                vals = grids[:, bi, ki]
                rows.append({"s_frac": a, "B": B, "k": k, "am_mean": float(vals.mean()),
                             "am_sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                             "runs": int(vals.size)})
    payload = {"command": "sweep", "config": vars(args), "provenance": experiments.provenance(),
               "rows": rows}
    _write(args, payload, rows)
    return EXIT_OK


def cmd_bench(args) -> int:
    ns = parse_int_list(args.n_grid)
    if args.rho <= 0 or args.rho > 1:
        raise ConfigError("--rho must lie in (0, 1]")
    rows = []
    for n in ns:
        n_minor = max(args.k, int(round(args.rho * n / 2)))
        train = gen_two_moons(TwoMoonsSpec(n - n_minor, n_minor, 0.2, args.seed))
        X_test = gen_two_moons(TwoMoonsSpec(args.queries, max(1, args.queries // 100), 0.2,
                                            args.seed + 1)).features
        for method, spec in (("knn", MethodSpec("knn")),
                             ("underbag-knn", MethodSpec("underbag-knn", B=args.rounds, s_frac=args.s_frac))):
            fits, preds, builds = [], [], []
            for r in range(args.repeats):
                f, p = experiments.time_fit_predict(train, X_test, spec, args.k,
                                                    experiments.derive_seed(args.seed, n, r))
                fits.append(f)
                preds.append(p)
            if method == "knn":
                for _ in range(args.repeats):
                    with stopwatch() as t:
                        kdtree.build(train.features)
                    builds.append(t[0])
            rows.append({"n": n, "method": method, "k": args.k,
                         "B": 1 if method == "knn" else args.rounds,
                         "fit_seconds": float(np.median(fits)),
                         "predict_seconds": float(np.median(preds)),
                         "total_seconds": float(np.median(fits) + np.median(preds)),
                         "build_seconds": float(np.median(builds)) if builds else None})
    fits = {}
    for method in ("knn", "underbag-knn"):
        sel = [r for r in rows if r["method"] == method]
        fits[method] = {
            "fit_slope": experiments.log_log_slope([r["n"] for r in sel], [r["fit_seconds"] for r in sel]),
            "predict_slope": experiments.log_log_slope([r["n"] for r in sel],
                                                       [r["predict_seconds"] for r in sel]),
        }
    payload = {"command": "bench", "config": vars(args), "provenance": experiments.provenance(),
               "rows": rows, "log_log_slopes": fits}
    _write(args, payload, rows)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    results = selfcheck.run_all(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE


COMMANDS = {"fit-eval": cmd_fit_eval, "sweep": cmd_sweep, "bench": cmd_bench,
            "oracle-check": cmd_oracle_check}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ValueError as exc:
        # malformed UBKNN_* value feeding a default
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if getattr(args, "threads", None) is not None:
            _set_threads(args.threads)
        return COMMANDS[args.command](args)
    except RuntimeError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, DataError):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
