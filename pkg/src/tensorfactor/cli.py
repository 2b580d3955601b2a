"""Command-line entry point: ``tensorfactor <command> ...``.

Every command writes its tables plus a JSON manifest (arguments, resolved
defaults, versions, numerical backend) so a run can be repeated exactly.

Exit codes: 0 success, 2 usage error, 3 bad input data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .dataio import (
    FORMATS,
    load_matrix,
    load_series,
    read_json,
    read_table,
    save_matrix,
    save_series,
    write_json,
    write_table,
)
from .dgp import DgpSpec, gen_series
from .diagnostics import loading_loss, theory_report
from .errors import DataError, NumericError, RankError, TensorFactorError
from .estimators import METHODS, ModelSpec, demean, estimate, select_ranks
from .experiment import (
    RECORD_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentGrid,
    rate_records,
    run_experiment,
    summarize,
)
from .postprocess import normalize_columns, scaled_integers, varimax
from .ratefit import COEF_NAMES, fit_rate_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _ints(text: str):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def manifest(command: str, config: dict, outputs, seed=None) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "versions": {
            "tensorfactor": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "backend": kernels.get_backend(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _args_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


# -- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = read_json(args.config)
    if args.force:
        cfg["force"] = True
    if args.workers is not None:
        cfg["workers"] = args.workers
    try:
        grid = ExperimentGrid.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args.out)
    rows = run_experiment(grid)
    summary = summarize(rows)
    write_table(out / "records.csv", rows, RECORD_COLUMNS)
    write_table(out / "summary.csv", summary, SUMMARY_COLUMNS)
    files = [out / "records.csv", out / "summary.csv"]
    write_json(out / "manifest.json", manifest("simulate", grid.to_dict(), files, grid.base_seed))
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} records, {failed} failed; wrote {out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        spec = DgpSpec.from_dict(read_json(args.config))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args.out)
    x, truth = gen_series(spec)
    series_path = out / ("series.csv" if args.format == "long-csv" else "series.tfts")
    save_series(series_path, x, args.format)
    truth_path = out / "truth.npz"
    np.savez(truth_path, **{f"loading{k + 1}": a for k, a in enumerate(truth.loadings)})
    write_json(out / "manifest.json", manifest("generate", spec.to_dict(), [series_path, truth_path], spec.seed))
    print(f"wrote {series_path}")
    return EXIT_OK


def _load_truth(path, K):
    if str(path).endswith(".npz"):
        with np.load(path) as z:
            return [z[f"loading{k + 1}"] for k in range(K)]
    paths = str(path).split(",")
    if len(paths) != K:
        raise UsageError(f"--truth needs {K} comma-separated CSV files or one .npz")
    return [load_matrix(p) for p in paths]


def cmd_estimate(args) -> int:
    series = load_series(args.input, args.format)
    method = args.method
    if args.iterate:
        if method not in ("TOPUP", "TIPUP"):
            raise UsageError("--iterate applies to TOPUP or TIPUP only")
        method = "i" + method
    if args.demean:
        series = demean(series)
    if len(args.ranks) != series.order:
        raise UsageError(f"--ranks needs {series.order} values, got {len(args.ranks)}")
    spec = ModelSpec(
        args.ranks,
        h0=args.h0,
        method=method,
        max_iter=args.max_iter,
        iter_tol=args.iter_tol,
        allow_long_lag=args.allow_long_lag,
    )
    est = estimate(series, spec)
    out = _outdir(args.out)
    files = []
    for k, u in enumerate(est.bases):
        p = out / f"loading_mode{k + 1}.csv"
        save_matrix(p, u)
        files.append(p)
    ladder_rows = [
        dict(mode=k + 1, index=i + 1, value=float(v))
        for k, lad in enumerate(est.singular_ladders)
        for i, v in enumerate(lad)
    ]
    write_table(out / "ladders.csv", ladder_rows, ("mode", "index", "value"))
    files.append(out / "ladders.csv")
    np.save(out / "factors.npy", est.factors.data)
    files.append(out / "factors.npy")
    result = {"method": method, "h0": args.h0, "ranks": list(est.ranks),
              "iterations_used": est.iterations_used, "converged": est.converged}
    if args.truth:
        truth = _load_truth(args.truth, series.order)
        losses = [loading_loss(u, a) for u, a in zip(est.bases, truth)]
        result["loss"] = losses
        write_table(out / "loss.csv", [dict(mode=k + 1, loss=v) for k, v in enumerate(losses)], ("mode", "loss"))
        files.append(out / "loss.csv")
        for k, v in enumerate(losses):
            print(f"mode {k + 1} loss {v:.3e}")
    config = dict(_args_dict(args), resolved=spec.__dict__ | {"ranks": list(spec.ranks)})
    m = manifest("estimate", config, files)
    m["result"] = result
    write_json(out / "manifest.json", m)
    return EXIT_OK


def cmd_ratefit(args) -> int:
    rows = read_table(args.input)
    if rows and "mean_loss" in rows[0]:
        records = rate_records(rows, args.method, mode=args.mode, h0=args.h0)
    else:
        records = [r for r in rows if r.get("method", args.method) == args.method]
    if not records:
        raise DataError(f"no {args.method} records in {args.input}")
    res = fit_rate_model(records, method=args.method, workers=args.workers)
    out = _outdir(args.out)
    row = dict(res.coefficients, method=args.method, residual_sse=res.residual_sse,
               iterations=res.iterations, converged=res.converged)
    cols = ("method",) + COEF_NAMES + ("residual_sse", "iterations", "converged")
    write_table(out / "coefficients.csv", [row], cols)
    write_json(out / "manifest.json", manifest("ratefit", _args_dict(args), [out / "coefficients.csv"]))
    print(" ".join(f"{n}={res.coefficients[n]:.3f}" for n in COEF_NAMES))
    return EXIT_OK


def cmd_report(args) -> int:
    series = load_series(args.input, args.format)
    factors = load_series(args.factors) if args.factors else None
    rep = theory_report(series, args.h0, ranks=args.ranks, factors=factors, empirical=args.empirical)
    out = _outdir(args.out)
    write_json(out / "report.json", rep.to_dict())
    write_json(out / "manifest.json", manifest("report", _args_dict(args), [out / "report.json"]))
    return EXIT_OK


def cmd_rotate(args) -> int:
    a = load_matrix(args.input)
    res = varimax(a, tol=args.tol, max_sweeps=args.max_sweeps, normalize=args.kaiser)
    mat = res.matrix
    flags = np.zeros(mat.shape[1], bool)
    if not args.no_normalize:
        mat, flags = normalize_columns(mat)
    out = _outdir(args.out)
    save_matrix(out / "rotated.csv", mat)
    save_matrix(out / "rotation.csv", res.rotation)
    files = [out / "rotated.csv", out / "rotation.csv"]
    scale = 100.0 if args.percent else args.scale
    if scale:
        disp = scaled_integers(mat, scale, truncate=args.truncate)
        np.savetxt(out / "display.csv", disp, delimiter=",", fmt="%d")
        files.append(out / "display.csv")
    m = manifest("rotate", _args_dict(args), files)
    m["result"] = {"criterion": res.criterion_value, "sweeps": res.sweeps,
                   "flagged_columns": np.flatnonzero(flags).tolist()}
    write_json(out / "manifest.json", m)
    return EXIT_OK


def cmd_select_ranks(args) -> int:
    series = load_series(args.input, args.format)
    sel = select_ranks(series, h0=args.h0, method=args.method, min_ratio=args.min_ratio)
    out = _outdir(args.out)
    rows = [dict(mode=k + 1, rank=r, flag=f or "") for k, (r, f) in enumerate(zip(sel.ranks, sel.flags))]
    write_table(out / "ranks.csv", rows, ("mode", "rank", "flag"))
    write_json(out / "manifest.json", manifest("select-ranks", _args_dict(args), [out / "ranks.csv"]))
    print(",".join(map(str, sel.ranks)) + ("  (flagged)" if sel.flagged else ""))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tensorfactor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--backend", choices=("numba", "numpy"), help="kernel backend override")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("input")
        sp.add_argument("--format", choices=sorted(FORMATS), help="default: from the extension")
        sp.add_argument("--out", default=".")

    s = sub.add_parser("simulate", help="run a Monte-Carlo grid from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", default="results")
    s.add_argument("--workers", type=int)
    s.add_argument("--force", action="store_true", help="allow cells beyond the desk-scale limits")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("generate", help="write one simulated series and its true loadings")
    s.add_argument("config")
    s.add_argument("--out", default=".")
    s.add_argument("--format", choices=sorted(FORMATS), default="dense-binary")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("estimate", help="estimate loading spaces of a series")
    data_args(s)
    s.add_argument("--ranks", type=_ints, required=True)
    s.add_argument("--h0", type=int, default=1)
    s.add_argument("--method", choices=METHODS, default="TIPUP")
    s.add_argument("--iterate", action="store_true")
    s.add_argument("--demean", action="store_true")
    s.add_argument("--max-iter", type=int, default=20)
    s.add_argument("--iter-tol", type=float, default=1e-8)
    s.add_argument("--allow-long-lag", action="store_true")
    s.add_argument("--truth", help="true loadings (.npz or comma-separated CSVs) to report loss")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("ratefit", help="fit the two-term rate model to a results table")
    s.add_argument("input")
    s.add_argument("--method", choices=("TIPUP", "TOPUP", "iTIPUP", "iTOPUP"), default="TIPUP")
    s.add_argument("--mode", type=int, default=1)
    s.add_argument("--h0", type=int, default=1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_ratefit)

    s = sub.add_parser("report", help="signal-strength quantities of a series")
    data_args(s)
    s.add_argument("--h0", type=int, default=1)
    s.add_argument("--ranks", type=_ints)
    s.add_argument("--factors", help="factor series, for the lagged moments")
    s.add_argument("--empirical", action="store_true", help="the input is observed data, not a signal")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("rotate", help="varimax-rotate and normalize a loading matrix")
    s.add_argument("input")
    s.add_argument("--out", default=".")
    s.add_argument("--scale", type=float, default=30.0, help="display multiplier (0 to skip)")
    s.add_argument("--percent", action="store_true", help="display in percent")
    s.add_argument("--truncate", action="store_true", default=True)
    s.add_argument("--round", dest="truncate", action="store_false")
    s.add_argument("--kaiser", action="store_true", help="Kaiser row normalization")
    s.add_argument("--no-normalize", action="store_true", help="skip dividing columns by their sums")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-sweeps", type=int, default=1000)
    s.set_defaults(func=cmd_rotate)

    s = sub.add_parser("select-ranks", help="eigenvalue-ratio rank choice per mode")
    data_args(s)
    s.add_argument("--h0", type=int, default=1)
    s.add_argument("--method", choices=("TIPUP", "TOPUP", "UP"), default="TIPUP")
    s.add_argument("--min-ratio", type=float, default=2.0)
    s.set_defaults(func=cmd_select_ranks)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.backend:
        kernels.set_backend(args.backend)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TensorFactorError, OSError, json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, RankError):
            print(f"usage error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
