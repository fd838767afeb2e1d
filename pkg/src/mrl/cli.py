"""Command-line interface.

    mrl estimate  --input data.txt [--grid 0,10,20]
    mrl band      --input data.txt --beta 0.9 [--m 8]
    mrl pointwise --input data.txt --xs 0,100,200 --beta 0.9
    mrl coverage  --model exp:1 --n 500 --reps 2000 --beta 0.9 --seed 42 --workers 4
    mrl simulate  --model exp:1 --n 1000 --reps 2000 --seed 42
    mrl sample    --model weibull:2 --n 500 --seed 1 --out data.txt
    mrl replay    out.csv.manifest.json

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bands import pointwise_interval, q_of_a, simultaneous_band
from .empirical import SortedSample, mrl_at, mrl_curve
from .models import parse_model
from .montecarlo import ExperimentConfig, band_coverage, pointwise_normality

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
TABLE_A = (0.871, 1.149, 1.534, 1.960, 2.241, 2.807)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- input ---------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetFile:
    path: str
    values: tuple
    digest: str
    header: str | None = None


def read_dataset(path: str) -> DatasetFile:
    """Read one value per line (or a single-column CSV, optional header)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    text = raw.decode("utf-8-sig")
    values = []
    header = None
    seen_first = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        if sum(1 for c in cells if c) > 1:
            raise DataError(f"line {lineno}: expected a single column, got {row!r}")
        cell = next(c for c in cells if c)
        try:
            v = float(cell)
        except ValueError:
            if not seen_first:
                header = cell
                seen_first = True
                continue
            raise DataError(f"line {lineno}: cannot parse {cell!r} as a number") from None
        seen_first = True
        if not math.isfinite(v):
            raise DataError(f"line {lineno}: value {cell!r} is not finite")
        if v < 0:
            raise DataError(f"line {lineno}: negative value {cell!r}")
        values.append(v)
    if not values:
        raise DataError("no data")
    return DatasetFile(path, tuple(values), hashlib.sha256(raw).hexdigest(), header)


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1): {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return v


# -- output --------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def _table_text(columns, rows, fmt: str, metadata=None) -> str:
    if fmt == "json":
        records = [dict(zip(columns, (_jsonable(v) for v in row))) for row in rows]
        payload = {"columns": list(columns), "rows": records}
        if metadata:
            payload["metadata"] = metadata
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _manifest(args, command: str, params: dict, digest=None, results=None) -> dict:
    return {
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "input_digest": digest,
        "results": _jsonable(results or {}),
    }


def _write_manifest(args, manifest: dict):
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    path = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)


# -- commands ------------------------------------------------------------------


def _load(args):
    data = read_dataset(args.input)
    return data, SortedSample(data.values)


def cmd_estimate(args) -> int:
    data, sample = _load(args)
    curve = mrl_curve(sample)
    n = sample.n
    vals = sample.values
    rows = []
    points = sorted({0.0, *curve.breakpoints.tolist(), *(args.grid or [])})
    breaks = set(curve.breakpoints.tolist())
    for x in points:
        if x < 0:
            raise DataError(f"grid point {x} is negative")
        if x in breaks and x > 0:
            k = n - int(np.searchsorted(vals, x, side="left"))
            rows.append((x, float(curve.left_limit(x)), k / n, k))
        k = n - int(np.searchsorted(vals, x, side="right"))
        rows.append((x, float(mrl_at(sample, x)), k / n, k))
    _emit(_table_text(("x", "ehat", "sf", "k"), rows, args.format), args.out)
    params = {"input": args.input, "grid": args.grid, "format": args.format}
    _write_manifest(args, _manifest(args, "estimate", params, data.digest, {"n": n}))
    return EXIT_OK


def cmd_band(args) -> int:
    data, sample = _load(args)
    if args.m is not None and args.m >= sample.n:
        raise UsageError(f"--m must be smaller than n={sample.n}")
    try:
        band = simultaneous_band(sample, args.beta, args.m, extra_points=args.grid or ())
    except ValueError as exc:
        raise DataError(str(exc)) from None
    cols = ("x", "lower", "ehat", "upper", "reference", "halfwidth")
    rows = zip(band.x, band.lower, band.center, band.upper, band.reference, band.half_width)
    meta = band.metadata()
    _emit(_table_text(cols, list(rows), args.format, metadata=meta), args.out)
    params = {
        "input": args.input,
        "beta": args.beta,
        "m": args.m,
        "grid": args.grid,
        "format": args.format,
    }
    _write_manifest(args, _manifest(args, "band", params, data.digest, meta))
    return EXIT_OK


def cmd_pointwise(args) -> int:
    data, sample = _load(args)
    if not args.xs:
        raise UsageError("--xs is required")
    cols = ("x", "k", "ehat", "se", "lower", "upper", "small_k_warning", "error")
    rows = []
    failures = 0
    for x in args.xs:
        try:
            iv = pointwise_interval(sample, x, args.beta)
        except ValueError as exc:
            failures += 1
            k = int(sample.count_above(x))
            rows.append((x, k, None, None, None, None, None, str(exc)))
            continue
        rows.append((x, iv.k, iv.center, iv.se, iv.lower, iv.upper, iv.small_k, ""))
    _emit(_table_text(cols, rows, args.format), args.out)
    params = {"input": args.input, "xs": args.xs, "beta": args.beta, "format": args.format}
    _write_manifest(args, _manifest(args, "pointwise", params, data.digest, {"failed": failures}))
    return EXIT_DATA if failures == len(args.xs) else EXIT_OK


def _model(args):
    try:
        model = parse_model(args.model)
        model.residual_variance(0.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return model


def _mc_params(args) -> dict:
    return {
        "model": args.model,
        "n": args.n,
        "reps": args.reps,
        "beta": args.beta,
        "m": args.m,
        "seed": args.seed,
        "workers": args.workers,
        "xs": args.xs,
    }


def _config(args, model):
    if args.n < 4:
        raise UsageError("--n must be at least 4")
    if args.m is not None and args.m >= args.n:
        raise UsageError("--m must be smaller than --n")
    return ExperimentConfig(
        model=model,
        n=args.n,
        replicates=args.reps,
        beta=args.beta,
        m=args.m,
        base_seed=args.seed,
        workers=args.workers,
        probe_x=tuple(args.xs or ()),
    )


def cmd_coverage(args) -> int:
    model = _model(args)
    config = _config(args, model)
    report = band_coverage(config).to_dict()
    params = _mc_params(args)
    manifest = _manifest(args, "coverage", params)
    payload = {"report": _jsonable(report), "manifest": manifest}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    _write_manifest(args, manifest)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _model(args)
    config = _config(args, model)
    report = band_coverage(config)
    stats = np.asarray(report.sup_stats)
    summary = {
        "a": list(TABLE_A),
        "q_theory": [q_of_a(a) for a in TABLE_A],
        "q_empirical": [float(np.mean(stats < a)) for a in TABLE_A],
        "quantiles": {
            str(p): float(np.quantile(stats, p)) for p in (0.25, 0.5, 0.75, 0.9, 0.95, 0.99)
        },
        "coverage": report.coverage,
        "coverage_se": report.coverage_se,
        "pointwise_ks": {repr(x): pointwise_normality(config, x) for x in (args.xs or ())},
        "runtime": report.runtime,
    }
    manifest = _manifest(args, "simulate", _mc_params(args))
    payload = {"report": _jsonable(summary), "manifest": manifest}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    _write_manifest(args, manifest)
    return EXIT_OK


def cmd_sample(args) -> int:
    try:
        model = parse_model(args.model)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sample = model.sample(args.n, args.seed)
    text = "".join(f"{v!r}\n" for v in sample.values.tolist())
    _emit(text, args.out)
    params = {"model": args.model, "n": args.n, "seed": args.seed}
    _write_manifest(args, _manifest(args, "sample", params))
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
        command = manifest["command"]
        params = manifest["params"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest_file}: {exc}") from None
    argv = [command]
    for key, value in params.items():
        if value is None:
            continue
        flag = "--" + key
        if isinstance(value, list):
            value = ",".join(repr(float(v)) for v in value)
        argv += [flag, str(value)]
    if manifest.get("input_digest"):
        digest = read_dataset(params["input"]).digest
        if digest != manifest["input_digest"]:
            raise DataError(f"input {params['input']} has changed since the manifest was written")
    if args.out:
        argv += ["--out", args.out]
    if args.manifest:
        argv += ["--manifest", args.manifest]
    return main(argv)


# -- parser --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed() -> int:
    env = os.environ.get("MRL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MRL_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrl", description="Mean residual life estimation and confidence bands.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def outputs(p, formats=True):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--manifest", help="manifest path (default: OUT.manifest.json or stderr)")
        if formats:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("estimate", help="empirical mean residual life at breakpoints")
    p.add_argument("--input", required=True)
    p.add_argument("--grid", type=_float_list)
    outputs(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("band", help="simultaneous confidence band")
    p.add_argument("--input", required=True)
    p.add_argument("--beta", type=_probability, default=0.90)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--grid", type=_float_list, help="extra x-values inside [0, bhat]")
    outputs(p)
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("pointwise", help="pointwise confidence intervals")
    p.add_argument("--input", required=True)
    p.add_argument("--xs", type=_float_list, required=True)
    p.add_argument("--beta", type=_probability, default=0.90)
    outputs(p)
    p.set_defaults(func=cmd_pointwise)

    for name, func, helptext in (
        ("coverage", cmd_coverage, "Monte Carlo band coverage"),
        ("simulate", cmd_simulate, "Monte Carlo sup-statistic law and pointwise normality"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", required=True, help="exp:THETA, weibull:THETA, pareto:C, gammamrl:ALPHA")
        p.add_argument("--n", type=_positive_int, required=True)
        p.add_argument("--reps", type=_positive_int, default=1000)
        p.add_argument("--beta", type=_probability, default=0.90)
        p.add_argument("--m", type=_positive_int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=_positive_int, default=1)
        p.add_argument("--xs", type=_float_list, help="probe x-values for pointwise checks")
        outputs(p, formats=False)
        p.set_defaults(func=func)

    p = sub.add_parser("sample", help="draw a dataset from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int)
    outputs(p, formats=False)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest_file")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
