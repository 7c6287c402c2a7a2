"""Command-line front end.

Subcommands:
  fit       two-step fit on CSV data; writes a fit-result JSON document
  predict   evaluate a saved fit at covariate points; writes CSV
  test-sa   test of the simplifying assumption (constant conditional
            dependence); writes a test-result JSON document
  simulate  draw a sample from a built-in scenario; writes CSV
  bench     estimator-comparison or rejection-rate tables; writes CSV
  cv        cross-validate the penalty level; writes a JSON document

Conventions.  CSV files are comma separated with a '.' decimal point,
UTF-8, header row required; lines starting with '#' are ignored.  Input
columns default to x1, x2 and every column named z1, z2, ... (or a single
z); other names are picked with --x1/--x2/--z.  Documents go to stdout
unless --output is given; JSON is emitted with sorted keys, so reruns
with the same arguments, input files and seed are byte-identical apart
from the "timing" fields.  Every JSON document carries the fully
resolved options under its "cli" key and validates against the matching
schema file shipped under ckreg/schemas/.

Errors are printed as a single JSON line on stderr.  Exit codes:
0 success, 2 usage error, 3 data error, 4 numerical failure
(a non-converged second stage exits 4 unless --allow-nonconverged).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import replace

import numpy as np

from .bench import (
    POWER_CONFIG,
    BenchConfig,
    comparison_table,
    long_format_csv,
    power_table_to_csv,
    table_to_csv,
    test_power_table,
)
from .dictionary import (
    build_family_1d,
    build_family_2d,
    constant_dictionary,
    from_descriptor,
    to_descriptor,
    with_input_box,
)
from .errors import (
    ArgumentError,
    CkregError,
    DataError,
    DegenerateInputError,
    NumericalError,
)
from .inference import bootstrap_pvalue, wald_test
from .kernels import KernelSpec, Sample, rule_of_thumb_bandwidth
from .pipeline import (
    FitConfig,
    cross_validate_lambda,
    from_json_dict,
    predict,
    to_json_dict,
    two_step_fit,
)
from .simulation import get_setting, sample_setting
from .transforms import TransformSpec

CV_SCHEMA = "ckreg.cv_result/1"


# ---------------------------------------------------------------- I/O


def _jsonify(value):
    """JSON-safe copy: numpy scalars to python, non-finite floats to null."""
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonify(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def _emit_text(text: str, output: str | None) -> None:
    if output:
        try:
            with open(output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise DataError(f"cannot write {output}: {exc}") from None
    else:
        sys.stdout.write(text)


def _emit_json(doc: dict, output: str | None) -> None:
    text = json.dumps(_jsonify(doc), sort_keys=True, indent=2, allow_nan=False)
    _emit_text(text + "\n", output)


def _resolved(args: argparse.Namespace) -> dict:
    """The fully resolved options, echoed into every JSON document."""
    return {
        k: _jsonify(v)
        for k, v in sorted(vars(args).items())
        if k != "handler"
    }


def _read_table(path: str) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [
                r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")
            ]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    try:
        [float(c) for c in header]
    except ValueError:
        pass
    else:
        raise DataError(f"{path}: missing header row")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"{path}: line {i}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            data[i - 2] = [float(c) for c in row]
        except ValueError:
            raise DataError(f"{path}: line {i}: non-numeric value") from None
    return {name: data[:, j] for j, name in enumerate(header)}


def _z_column_names(available, zflag: str | None) -> list[str]:
    if zflag:
        names = [c.strip() for c in zflag.split(",") if c.strip()]
        if not names:
            raise ArgumentError("--z needs at least one column name")
        return names
    indexed = []
    for name in available:
        m = re.fullmatch(r"z(\d+)", name)
        if m:
            indexed.append((int(m.group(1)), name))
    if indexed:
        return [name for _, name in sorted(indexed)]
    if "z" in available:
        return ["z"]
    raise DataError("no z1, z2, ... (or z) columns found; pass --z")


def _sample_from_csv(path: str, args) -> Sample:
    table = _read_table(path)
    znames = _z_column_names(list(table), args.z)
    missing = [c for c in [args.x1, args.x2, *znames] if c not in table]
    if missing:
        raise DataError(f"{path}: missing columns: {', '.join(missing)}")
    z = np.column_stack([table[c] for c in znames])
    try:
        return Sample(x1=table[args.x1], x2=table[args.x2], z=z)
    except ArgumentError as exc:
        raise DataError(f"{path}: {exc}") from None


# ------------------------------------------------------- option parsing


def _mesh(lo, hi, k: int, dim: int) -> np.ndarray:
    axes = [np.linspace(lo[i], hi[i], k) for i in range(dim)]
    if dim == 1:
        return axes[0][:, None]
    mats = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mats])


def _parse_points_spec(spec: str, dim: int) -> np.ndarray:
    """grid:a:b:k (k equispaced points per axis in [a,b]^dim) or a CSV
    path with z columns."""
    if spec.startswith("grid:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ArgumentError("grid form is grid:a:b:k")
        try:
            a, b, k = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise ArgumentError("grid form is grid:a:b:k with numbers") from None
        if not a < b:
            raise ArgumentError("grid needs a < b")
        if k < 1:
            raise ArgumentError("grid needs k >= 1")
        return _mesh([a] * dim, [b] * dim, k, dim)
    table = _read_table(spec)
    names = _z_column_names(list(table), None)
    pts = np.column_stack([table[c] for c in names])
    if pts.shape[1] != dim:
        raise DataError(f"{spec}: expected {dim} z columns, found {pts.shape[1]}")
    return pts


def _default_design_points(dim: int, box) -> np.ndarray:
    # inset 1% per side; boundary points are poor kernel targets
    if box is None:
        lo, hi = np.full(dim, 0.01), np.full(dim, 0.99)
    else:
        width = box[1] - box[0]
        lo, hi = box[0] + 0.01 * width, box[1] - 0.01 * width
    k = 100 if dim == 1 else 10
    return _mesh(lo, hi, k, dim)


def _parse_input_box(flag: str, z: np.ndarray):
    if flag == "auto":
        return z.min(axis=0), z.max(axis=0)
    parts = flag.split(":")
    if len(parts) != 2:
        raise ArgumentError("--input-box must be 'auto' or 'lo:hi'")
    try:
        lo = np.array([float(v) for v in parts[0].split(",")], dtype=float)
        hi = np.array([float(v) for v in parts[1].split(",")], dtype=float)
    except ValueError:
        raise ArgumentError("--input-box must be 'auto' or 'lo:hi'") from None
    dim = z.shape[1]
    if lo.size == 1:
        lo = np.repeat(lo, dim)
    if hi.size == 1:
        hi = np.repeat(hi, dim)
    if lo.size != dim or hi.size != dim:
        raise ArgumentError(f"--input-box needs {dim} bounds per side")
    if not np.all(hi > lo):
        raise ArgumentError("--input-box needs hi > lo on every axis")
    return lo, hi


def _dictionary_from_flag(flag: str | None, dim: int):
    if flag is None:
        flag = "family-1d" if dim == 1 else "family-2d:1"
    if flag == "constant":
        return constant_dictionary(dim)
    if flag == "family-1d":
        if dim != 1:
            raise ArgumentError("family-1d expects a one-dimensional covariate")
        return build_family_1d()
    m = re.fullmatch(r"family-2d(?::(\d+))?", flag)
    if m:
        if dim != 2:
            raise ArgumentError("family-2d expects a two-dimensional covariate")
        return build_family_2d(int(m.group(1) or 1))
    try:
        with open(flag, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {flag}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{flag}: not valid JSON ({exc})") from None
    try:
        d = from_descriptor(doc)
    except (ArgumentError, KeyError, TypeError) as exc:
        raise DataError(f"{flag}: {exc}") from None
    if d.input_dim != dim:
        raise DataError(
            f"{flag}: dictionary expects {d.input_dim}D input, data has {dim}"
        )
    return d


def _parse_lambda(text: str):
    if text == "cv":
        return "cv"
    try:
        lam = float(text)
    except ValueError:
        raise ArgumentError("--lambda must be a number or 'cv'") from None
    if lam < 0:
        raise ArgumentError("--lambda must be nonnegative")
    return lam


def _threads(text: str | None) -> int:
    if text is None:
        return 1
    if text == "auto":
        return os.cpu_count() or 1
    try:
        k = int(text)
    except ValueError:
        raise ArgumentError("--threads expects a count or 'auto'") from None
    if k < 1:
        raise ArgumentError("--threads must be >= 1")
    return k


def _build_fit_config(sample: Sample, args) -> FitConfig:
    dictionary = _dictionary_from_flag(args.dictionary, sample.p)
    box = None
    if args.input_box:
        box = _parse_input_box(args.input_box, sample.z)
        dictionary = with_input_box(dictionary, box[0], box[1])
    if args.design_points:
        points = _parse_points_spec(args.design_points, sample.p)
    else:
        points = _default_design_points(sample.p, box)
    if args.bandwidth is not None:
        if not args.bandwidth > 0:
            raise ArgumentError("--bandwidth must be positive")
        h = args.bandwidth
    else:
        h = rule_of_thumb_bandwidth(sample, args.bandwidth_multiplier)
    return FitConfig(
        kernel=KernelSpec(args.kernel, h, sample.p),
        dictionary=dictionary,
        design_points=points,
        transform=TransformSpec(args.transform),
        lam=_parse_lambda(args.lam),
        variant=args.variant,
        include_diagonal=not args.exclude_diagonal,
        standardize=not args.no_standardize,
        cv_folds=args.cv_folds,
        cv_multiplier=args.cv_multiplier,
        cv_scale=args.cv_scale,
        cv_swap_roles=args.cv_swap_roles,
        seed=args.seed,
    )


def _config_echo(cfg: FitConfig) -> dict:
    return {
        "kernel": {
            "family": cfg.kernel.family,
            "bandwidth": cfg.kernel.bandwidth,
            "dim": cfg.kernel.dim,
        },
        "transform": {
            "family": cfg.transform.family,
            "clamp_eps": cfg.transform.clamp_eps,
        },
        "dictionary": to_descriptor(cfg.dictionary),
        "design_points": cfg.design_points.tolist(),
        "lambda_requested": cfg.lam if isinstance(cfg.lam, str) else float(cfg.lam),
        "variant": cfg.variant,
        "include_diagonal": cfg.include_diagonal,
        "standardize": cfg.standardize,
        "cv_folds": cfg.cv_folds,
        "cv_multiplier": cfg.cv_multiplier,
        "cv_scale": cfg.cv_scale,
        "cv_swap_roles": cfg.cv_swap_roles,
        "seed": cfg.seed,
    }


def _fit_from_doc(doc):
    if not isinstance(doc, dict):
        raise DataError("fit file: expected a JSON object")
    fs = doc.get("first_stage")
    if isinstance(fs, dict):
        # invalid first-stage points were serialized as null
        fs = {
            k: [math.nan if v is None else v for v in vals]
            if isinstance(vals, list) else vals
            for k, vals in fs.items()
        }
        doc = {**doc, "first_stage": fs}
    try:
        return from_json_dict(doc)
    except (ArgumentError, KeyError, TypeError) as exc:
        raise DataError(f"fit file: {exc}") from None


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None


def _prediction_csv(fit, points: np.ndarray) -> str:
    tau = np.atleast_1d(predict(fit, points))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"z{i + 1}" for i in range(points.shape[1])] + ["tau_hat"])
    for row, value in zip(points, tau):
        writer.writerow([repr(float(v)) for v in row] + [repr(float(value))])
    return buf.getvalue()


def _check_converged(fit, args) -> None:
    if not fit.solution.converged and not args.allow_nonconverged:
        raise NumericalError(
            "second stage did not converge; rerun with --allow-nonconverged "
            "to accept the result"
        )


# ---------------------------------------------------------- subcommands


def _cmd_fit(args) -> int:
    sample = _sample_from_csv(args.csv, args)
    config = _build_fit_config(sample, args)
    fit = two_step_fit(sample, config)
    _check_converged(fit, args)
    doc = to_json_dict(fit)
    doc["cli"] = _resolved(args)
    _emit_json(doc, args.output)
    if args.predictions:
        _emit_text(
            _prediction_csv(fit, fit.config.design_points), args.predictions
        )
    return 0


def _cmd_predict(args) -> int:
    fit = _fit_from_doc(_load_json(args.fit))
    dim = fit.config.dictionary.input_dim
    if args.points:
        points = _parse_points_spec(args.points, dim)
    else:
        points = fit.config.design_points
    _emit_text(_prediction_csv(fit, points), args.output)
    return 0


def _cmd_test_sa(args) -> int:
    sample = _sample_from_csv(args.csv, args)
    config = _build_fit_config(sample, args)
    started = time.perf_counter()
    fit = two_step_fit(sample, config)
    _check_converged(fit, args)
    result = wald_test(
        sample,
        fit,
        variant=args.test_variant,
        remove_intercept=not args.keep_intercept,
        seed=args.seed,
    )
    doc = result.to_json_dict()
    if args.bootstrap:
        p = bootstrap_pvalue(
            sample,
            fit,
            config,
            B=args.bootstrap,
            seed=args.seed,
            variant=args.test_variant,
            remove_intercept=not args.keep_intercept,
        )
        doc["bootstrap"] = {
            "p_value": p,
            "resamples": args.bootstrap,
            "seed": args.seed,
        }
    doc["fit"] = to_json_dict(fit)
    doc["timing"] = {"seconds": time.perf_counter() - started}
    doc["cli"] = _resolved(args)
    _emit_json(doc, args.output)
    return 0


def _cmd_cv(args) -> int:
    sample = _sample_from_csv(args.csv, args)
    config = _build_fit_config(sample, args)
    started = time.perf_counter()
    result = cross_validate_lambda(sample, config)
    doc = {
        "schema": CV_SCHEMA,
        "lambda_cv": result.lambda_cv,
        "lambda_grid": result.lambda_grid.tolist(),
        "cv_errors": result.errors.tolist(),
        "folds": config.cv_folds,
        "skipped_folds": result.skipped_folds,
        "config": _config_echo(config),
        "timing": {"seconds": time.perf_counter() - started},
        "cli": _resolved(args),
    }
    _emit_json(doc, args.output)
    return 0


def _cmd_simulate(args) -> int:
    spec = get_setting(args.setting)
    if args.n < 1:
        raise ArgumentError("--n must be >= 1")
    sample = sample_setting(spec, args.n, np.random.default_rng(args.seed))
    columns = ["x1", "x2"] + [f"z{i + 1}" for i in range(sample.p)]
    meta = {"columns": columns, "cli": _resolved(args)}
    buf = io.StringIO()
    buf.write("# " + json.dumps(_jsonify(meta), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for i in range(sample.n):
        writer.writerow(
            [repr(float(sample.x1[i])), repr(float(sample.x2[i]))]
            + [repr(float(v)) for v in sample.z[i]]
        )
    _emit_text(buf.getvalue(), args.output)
    return 0


def _bench_config(args, base: BenchConfig) -> BenchConfig:
    updates = {}
    if args.h_multiplier is not None:
        updates["h_multiplier"] = args.h_multiplier
    if args.n_design is not None:
        updates["n_design"] = args.n_design
    if args.lam is not None:
        updates["lam"] = _parse_lambda(args.lam)
    if args.cv_multiplier is not None:
        updates["cv_multiplier"] = args.cv_multiplier
    if args.cv_folds is not None:
        updates["cv_folds"] = args.cv_folds
    if args.variant is not None:
        updates["variant"] = args.variant
    if args.exclude_diagonal:
        updates["include_diagonal"] = False
    if args.transform is not None:
        updates["transform"] = TransformSpec(args.transform)
    if args.kernel is not None:
        updates["kernel_family"] = args.kernel
    return replace(base, **updates) if updates else base


def _cmd_bench(args) -> int:
    n_jobs = _threads(args.threads)
    settings = [s.strip() for s in args.settings.split(",") if s.strip()]
    if not settings:
        raise ArgumentError("--settings needs at least one setting id")
    n_values = []
    for tok in str(args.n).split(","):
        tok = tok.strip()
        if tok:
            try:
                n_values.append(int(tok))
            except ValueError:
                raise ArgumentError("--n expects integers") from None
    if not n_values:
        raise ArgumentError("--n needs at least one sample size")
    cli_line = "# " + json.dumps({"cli": _resolved(args)}, sort_keys=True) + "\n"
    if args.mode == "power":
        config = _bench_config(args, POWER_CONFIG)
        rows = []
        for n in n_values:
            rows.extend(
                test_power_table(
                    settings,
                    n=n,
                    R=args.replications,
                    level=args.level,
                    config=config,
                    seed=args.seed,
                    variant=args.test_variant,
                    n_jobs=n_jobs,
                )
            )
        text = power_table_to_csv(rows, config)
    else:
        config = _bench_config(args, BenchConfig())
        estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
        if not estimators:
            raise ArgumentError("--estimators needs at least one estimator")
        cells = comparison_table(
            settings,
            estimators,
            n_values,
            args.replications,
            config=config,
            seed=args.seed,
            n_jobs=n_jobs,
        )
        to_csv = long_format_csv if args.format == "long" else table_to_csv
        text = to_csv(cells, config)
    _emit_text(cli_line + text, args.output)
    return 0


# --------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through exit code 2
        raise ArgumentError(message)


def _add_io_flags(p) -> None:
    p.add_argument("--output", metavar="PATH",
                   help="write the document here instead of stdout")
    p.add_argument("--seed", type=int, default=0)


def _add_data_flags(p) -> None:
    p.add_argument("csv", help="input CSV with columns x1,x2,z1[,z2,...]")
    p.add_argument("--x1", default="x1", metavar="COLUMN")
    p.add_argument("--x2", default="x2", metavar="COLUMN")
    p.add_argument("--z", metavar="COLUMNS",
                   help="comma-separated covariate column names")


def _add_model_flags(p) -> None:
    p.add_argument("--dictionary", "--dict", dest="dictionary", metavar="NAME",
                   help="family-1d, family-2d[:J], constant, or a descriptor "
                        "JSON path (default: family for the covariate dim)")
    p.add_argument("--transform", default="identity",
                   choices=["identity", "fisher", "loglog"])
    p.add_argument("--kernel", default="gaussian",
                   choices=["gaussian", "epanechnikov"])
    p.add_argument("--bandwidth", type=float, metavar="H",
                   help="fixed bandwidth (default: rule of thumb)")
    p.add_argument("--bandwidth-multiplier", type=float, default=0.25,
                   metavar="C", help="h = C * sigma(Z) * n^(-1/5)")
    p.add_argument("--design-points", metavar="SPEC",
                   help="grid:a:b:k or a CSV path (default grid over the "
                        "covariate box, 1%% inset)")
    p.add_argument("--input-box", metavar="BOX",
                   help="'auto' or 'lo:hi' to rescale covariates into the "
                        "dictionary's [0,1] domain")
    p.add_argument("--lambda", dest="lam", default="cv", metavar="VALUE",
                   help="penalty level, a number or 'cv' (default cv)")
    p.add_argument("--cv-folds", type=int, default=5, metavar="N")
    p.add_argument("--cv-multiplier", type=float, default=2.0, metavar="M",
                   help="use M * lambda_cv after cross-validation")
    p.add_argument("--cv-scale", default="tau", choices=["tau", "transformed"])
    p.add_argument("--cv-swap-roles", action="store_true")
    p.add_argument("--variant", default="g2", choices=["g1", "g2", "g3"],
                   help="concordance pair kernel")
    p.add_argument("--exclude-diagonal", action="store_true")
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--allow-nonconverged", action="store_true")


def _build_parser() -> _Parser:
    parser = _Parser(prog="ckreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("fit", help="two-step fit on CSV data")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_io_flags(p)
    p.add_argument("--predictions", metavar="PATH",
                   help="also write a (z, tau_hat) CSV at the design points")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("predict", help="evaluate a saved fit")
    p.add_argument("--fit", required=True, metavar="PATH",
                   help="fit-result JSON written by the fit subcommand")
    p.add_argument("--points", metavar="SPEC",
                   help="grid:a:b:k or a CSV path (default: the fit's "
                        "design points)")
    _add_io_flags(p)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("test-sa",
                       help="test the simplifying assumption (constant tau)")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_io_flags(p)
    p.add_argument("--test-variant", default="as_printed",
                   choices=["as_printed", "studentized"])
    p.add_argument("--keep-intercept", action="store_true",
                   help="include the constant coefficient in the null")
    p.add_argument("--bootstrap", type=int, metavar="B",
                   help="add a bootstrap p-value with B resamples")
    p.set_defaults(handler=_cmd_test_sa)

    p = sub.add_parser("cv", help="cross-validate the penalty level")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_io_flags(p)
    p.set_defaults(handler=_cmd_cv)

    p = sub.add_parser("simulate", help="draw a sample from a scenario")
    p.add_argument("--setting", required=True, metavar="ID",
                   help="s1..s6 (1D) or d1..d3 (2D)")
    p.add_argument("--n", type=int, required=True)
    _add_io_flags(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("bench", help="simulation-study tables")
    p.add_argument("--mode", default="table", choices=["table", "power"])
    p.add_argument("--settings", default="s1,s2,s3,s4,s5,s6")
    p.add_argument("--estimators", default="kernel,two_step",
                   help="comma list from kernel, two_step, oracle")
    p.add_argument("--n", default="2000",
                   help="comma-separated sample sizes")
    p.add_argument("--replications", type=int, default=30, metavar="R")
    p.add_argument("--level", type=float, default=0.05,
                   help="nominal level for --mode power")
    p.add_argument("--test-variant", default="as_printed",
                   choices=["as_printed", "studentized"])
    p.add_argument("--format", default="wide", choices=["wide", "long"])
    p.add_argument("--threads", metavar="N", help="worker count or 'auto'")
    p.add_argument("--h-multiplier", type=float, metavar="C")
    p.add_argument("--n-design", type=int, metavar="N")
    p.add_argument("--lambda", dest="lam", metavar="VALUE")
    p.add_argument("--cv-multiplier", type=float, metavar="M")
    p.add_argument("--cv-folds", type=int, metavar="N")
    p.add_argument("--variant", choices=["g1", "g2", "g3"])
    p.add_argument("--transform", choices=["identity", "fisher", "loglog"])
    p.add_argument("--kernel", choices=["gaussian", "epanechnikov"])
    p.add_argument("--exclude-diagonal", action="store_true")
    _add_io_flags(p)
    p.set_defaults(handler=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except ArgumentError as exc:
        return _fail(2, "usage", exc)
    except (DataError, DegenerateInputError) as exc:
        return _fail(3, "data", exc)
    except OSError as exc:
        return _fail(3, "data", exc)
    except np.linalg.LinAlgError as exc:
        return _fail(4, "numerical", exc)
    except CkregError as exc:
        return _fail(4, "numerical", exc)


def _fail(code: int, kind: str, exc) -> int:
    line = json.dumps({"error": kind, "message": str(exc)}, sort_keys=True)
    sys.stderr.write(line + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
