"""Command-line interface: ``simulate``, ``fit``, ``predict`` and ``report``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Errors are reported on stderr as a single line::

    ssfplsim: error kind=data message="..."
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ModelOptions, load_fit_config, load_simulation_config
from .dataio import (
    Dataset,
    RunReport,
    Schema,
    dump_json,
    expand_covariates,
    msep,
    read_dataset,
    read_schema,
    second_derivative,
    split,
    write_dataset,
    write_schema,
)
from .estimator import FitConfig, fit_sparse_linear, fit_ssfplsim
from .exceptions import (
    DataError,
    DegenerateDirectionError,
    DegenerateProjection,
    EmptyNeighborhood,
    GridMismatchError,
    NoFeasibleFit,
    NumericalDivergence,
    SingularDesign,
)
from .functional import build_bspline_basis, project
from .link import LinkModel
from .simulation import _setup, generate_replicate, run_scenario, true_direction
from .smoothing import smooth_projections

__all__ = ["main", "build_parser", "BUNDLED_CONFIG", "THREADS_ENV"]

log = logging.getLogger("ssfplsim")

BUNDLED_CONFIG = Path(__file__).with_name("configs") / "simulation.ini"
THREADS_ENV = "SSFPLSIM_THREADS"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _threads(arg) -> int:
    if arg is not None:
        t = arg
    else:
        env = os.environ.get(THREADS_ENV, "1")
        try:
            t = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if t < 1:
        raise UsageError("thread count must be at least 1")
    return t


def _fit_ini(cfg: FitConfig, opts: ModelOptions) -> str:
    def val(v):
        if v is None:
            return "none"
        if isinstance(v, tuple):
            return ", ".join(val(x) for x in v)
        return repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else str(v)

    lines = ["[fit]"]
    for f in dataclasses.fields(cfg):
        if f.name in ("baselines", "true_support"):
            continue
        lines.append(f"{f.name} = {val(getattr(cfg, f.name))}")
    lines.append("")
    lines.append("[model]")
    for f in dataclasses.fields(opts):
        lines.append(f"{f.name} = {val(getattr(opts, f.name))}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    scenarios, fit_cfg = load_simulation_config(args.config, M=args.M)
    threads = _threads(args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, header, timings = [], None, []
    for s in scenarios:
        t0 = time.perf_counter()
        report = run_scenario(s, fit_cfg, threads=threads)
        elapsed = time.perf_counter() - t0
        row = report.summary_row()
        header = list(row)
        rows.append([row[k] for k in header])
        dump_json(report.to_dict(), out / f"{s.label}.json")
        secs = [r for r in report.runtimes if r is not None]
        timings.append(f"{s.label} wall_seconds={elapsed:.3f} fit_seconds_mean="
                       f"{(sum(secs) / len(secs)) if secs else float('nan'):.3f} threads={threads}")
        print(f"scenario={s.label} correct_pct={_fmt(row['correct_pct'])} "
              f"incorrect_pct={_fmt(row['incorrect_pct'])} failures={row['failures']}")
        if args.emit_data:
            _emit_data(s, fit_cfg, report, out)
    _write_csv(out / "summary.csv", header, rows)
    # timings vary from run to run, so they stay out of the CSV/JSON outputs
    (out / "timings.log").write_text("\n".join(timings) + "\n")
    return EXIT_OK


def _emit_data(s, fit_cfg: FitConfig, report, out: Path) -> None:
    """Write replicate 0 of ``s`` as a dataset plus a matching schema and fit config."""
    grid, basis = _setup(s)
    theta0 = true_direction(basis, fit_cfg.calibration)
    data = generate_replicate(s, 0, theta0, grid)
    names = tuple(f"x{j + 1}" for j in range(s.p))
    ds = Dataset(data.y, data.x, names, data.curves)
    stem = out / f"{s.label}_rep0"
    schema = write_dataset(ds, stem.with_suffix(".csv"))
    write_schema(schema, stem.with_suffix(".schema"))
    opts = ModelOptions(spline_order=basis.order, knots_grid=(basis.interior_knots,))
    stem.with_suffix(".ini").write_text(_fit_ini(fit_cfg, opts))
    rep0 = next((r for r in report.replicates if r["replicate"] == 0), None)
    if rep0 is not None and not rep0["failed"]:
        print(f"scenario={s.label} replicate=0 selected={','.join(map(str, rep0['selected']))}")


# --------------------------------------------------------------------------
# fit / predict


def _preprocess(ds: Dataset, pre: dict) -> Dataset:
    curves = ds.curves
    if pre.get("derivative"):
        curves = second_derivative(curves, int(pre["derivative_basis_size"]))
    x, names = ds.x, ds.x_names
    if pre.get("expand_degree"):
        if x.shape[1] != 2:
            raise DataError("covariate expansion needs exactly two scalar covariates")
        x, names = expand_covariates(x[:, 0], x[:, 1], int(pre["expand_degree"]),
                                     bool(pre["interaction"]), names=ds.x_names)
    return Dataset(ds.y, x, tuple(names), curves, dict(ds.meta))


def _knots_grid(args, opts: ModelOptions):
    if args.knots is not None and args.knots_grid is not None:
        raise UsageError("--knots and --knots-grid are mutually exclusive")
    if args.knots is not None:
        return (args.knots,)
    if args.knots_grid is not None:
        try:
            grid = tuple(int(v) for v in args.knots_grid.split(",") if v.strip())
        except ValueError:
            raise UsageError("--knots-grid must be a comma-separated list of integers") from None
        if not grid:
            raise UsageError("--knots-grid is empty")
        return grid
    return tuple(opts.knots_grid)


def cmd_fit(args) -> int:
    fit_cfg, opts = load_fit_config(args.config)
    schema = read_schema(args.schema)
    if schema.response is None:
        raise DataError("the schema must name a response column for fitting")
    raw = read_dataset(args.data, schema)
    pre = {"derivative": opts.derivative, "derivative_basis_size": opts.derivative_basis_size,
           "expand_degree": opts.expand_degree, "interaction": opts.interaction}
    ds = _preprocess(raw, pre)
    if opts.n_train is not None:
        train, test = split(ds, opts.n_train)
    else:
        train, test = ds, None

    best, search = None, []
    for m in _knots_grid(args, opts):
        basis = build_bspline_basis(opts.spline_order, m, train.curves.grid)
        try:
            fit = fit_ssfplsim(train.curves, train.x, train.y, basis, fit_cfg)
        except NoFeasibleFit as exc:
            log.warning("knots=%d: %s", m, exc)
            search.append({"knots": m, "bic": None})
            continue
        search.append({"knots": m, "bic": fit.bic})
        if best is None or fit.bic < best[0].bic:
            best = (fit, basis, m)
    if best is None:
        raise NoFeasibleFit("no knot count produced a feasible fit")
    fit, basis, m = best

    model = LinkModel(fit, train.curves, train.x, train.y)
    u_train = model.training_index
    resid = model.partial_residuals
    u_grid = np.linspace(u_train.min(), u_train.max(), opts.link_grid_size)
    m_grid, _ = smooth_projections(u_grid, u_train, resid, fit.h_hat)

    report = RunReport(
        names=list(train.x_names),
        beta_hat=fit.beta_hat,
        selected=[train.x_names[j] for j in fit.selected],
        h_hat=fit.h_hat,
        lambda_hat=fit.lambda_hat,
        bic=fit.bic,
        knots=m,
        theta_coefficients=fit.theta_hat.coefficients,
        theta_grid=basis.grid.points,
        theta_values=fit.theta_hat.curve.values,
        link_u=u_grid,
        link_m=m_grid,
        model={"spline_order": basis.order, "interior_knots": m, "h": fit.h_hat,
               "training_index": u_train, "partial_residuals": resid,
               "calibration": fit_cfg.calibration},
        preprocess=pre,
        schema=schema.to_mapping(),
        knot_search=search,
        meta={"source": raw.meta.get("source"), "domain": raw.meta.get("domain"),
              "n_train": train.n, "n_test": 0 if test is None else test.n,
              "version": __version__},
    )
    if test is not None:
        pred, ok = _predict_from_report(report, test, widen=args.widen)
        if not ok.all():
            bad = int(np.flatnonzero(~ok)[0])
            raise EmptyNeighborhood(bad, fit.h_hat, f"test row {bad + 1} has an empty neighborhood "
                                                    f"for h={fit.h_hat!r}; rerun with --widen")
        report.predictions = pred
        report.residuals = test.y - pred
        report.msep = msep(test.y, pred)
        slm = fit_sparse_linear(train.x, train.y, fit_cfg)
        report.baseline_msep = msep(test.y, slm.predict(test.x))
        report.meta["baseline_selected"] = [train.x_names[j] for j in slm.selected]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "report.json")
    _write_csv(out / "theta.csv", ["t", "theta"], zip(map(float, basis.grid.points),
                                                      map(float, fit.theta_hat.curve.values)))
    _write_csv(out / "link.csv", ["u", "m_hat"],
               ((float(u), None if np.isnan(v) else float(v)) for u, v in zip(u_grid, m_grid)))
    if test is not None:
        _write_csv(out / "predictions.csv", ["row", "y", "prediction", "residual"],
                   ((opts.n_train + i + 1, float(test.y[i]), float(report.predictions[i]),
                     float(report.residuals[i])) for i in range(test.n)))
    idx = ",".join(str(j + 1) for j in fit.selected)
    print(f"selected={idx} names={','.join(report.selected)} knots={m} "
          f"h={fit.h_hat!r} lambda={fit.lambda_hat!r} bic={fit.bic!r}")
    if report.msep is not None:
        print(f"msep={report.msep!r} baseline_msep={report.baseline_msep!r}")
    return EXIT_OK


def _predict_from_report(report: RunReport, ds: Dataset, widen: bool = False):
    mdl = report.model
    basis = build_bspline_basis(int(mdl["spline_order"]), int(mdl["interior_knots"]), ds.curves.grid)
    theta = basis.curve(np.asarray(report.theta_coefficients, dtype=float))
    if len(report.names) != ds.x.shape[1]:
        raise DataError(f"model expects {len(report.names)} covariates, data has {ds.x.shape[1]}")
    u = project(ds.curves, theta)
    u_train = np.asarray(mdl["training_index"], dtype=float)
    resid = np.asarray(mdl["partial_residuals"], dtype=float)
    h = float(mdl["h"])
    m_hat, ok = smooth_projections(u, u_train, resid, h)
    if widen:
        for i in np.flatnonzero(~ok):
            hh = h
            while True:
                hh *= 1.5
                v, f = smooth_projections(u[i], u_train, resid, hh)
                if f[0]:
                    m_hat[i] = v[0]
                    break
        ok = np.ones_like(ok)
    return ds.x @ np.asarray(report.beta_hat, dtype=float) + m_hat, ok


def cmd_predict(args) -> int:
    report = RunReport.load(args.model)
    schema = read_schema(args.schema) if args.schema else Schema.from_mapping(report.schema)
    raw = read_dataset(args.data, schema, require_response=False)
    ds = _preprocess(raw, report.preprocess)
    pred, ok = _predict_from_report(report, ds, widen=args.widen)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise EmptyNeighborhood(bad, report.h_hat, f"row {bad + 1} has an empty neighborhood; "
                                                   "rerun with --widen")
    if ds.y is not None:
        rows = ((i + 1, float(ds.y[i]), float(pred[i]), float(ds.y[i] - pred[i])) for i in range(ds.n))
        _write_csv(Path(args.out), ["row", "y", "prediction", "residual"], rows)
        print(f"msep={msep(ds.y, pred)!r} n={ds.n}")
    else:
        _write_csv(Path(args.out), ["row", "prediction"], ((i + 1, float(pred[i])) for i in range(ds.n)))
        print(f"n={ds.n}")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def _ms(mean, sd, digits=4) -> str:
    if mean is None:
        return "NA"
    return f"{mean:.{digits}f} ({sd:.{digits}f})" if sd is not None else f"{mean:.{digits}f}"


def format_tables(summaries: list, runs: list) -> str:
    lines = []
    if summaries:
        summaries = sorted(summaries, key=lambda r: (r["c"], r["rho"], r["n"]))
        lines.append("Variable selection (% of coefficients set to zero)")
        lines.append(f"{'c':>6} {'rho':>5} {'n':>5} {'p':>5} {'M':>5} {'correct':>9} {'incorrect':>10}")
        for r in summaries:
            cor = "NA" if r["correct_pct"] is None else f"{r['correct_pct']:.3f}"
            inc = "NA" if r["incorrect_pct"] is None else f"{r['incorrect_pct']:.3f}"
            lines.append(f"{r['c']:>6g} {r['rho']:>5g} {r['n']:>5} {r['p']:>5} {r['M']:>5} {cor:>9} {inc:>10}")
        lines.append("")
        lines.append("Squared error of beta: mean (sd)")
        lines.append(f"{'c':>6} {'rho':>5} {'n':>5} {'ORACLE':>20} {'PLS':>20} {'OLS':>20}")
        for r in summaries:
            cells = [_ms(r[f"beta_se_{e}_mean"], r[f"beta_se_{e}_sd"]) for e in ("oracle", "pls", "ols")]
            lines.append(f"{r['c']:>6g} {r['rho']:>5g} {r['n']:>5} " + " ".join(f"{c:>20}" for c in cells))
        lines.append("")
        lines.append("Squared error of theta: mean (sd), and link MSEP median")
        lines.append(f"{'c':>6} {'rho':>5} {'n':>5} {'theta':>20} {'msep_median':>12}")
        for r in summaries:
            med = "NA" if r["msep_median"] is None else f"{r['msep_median']:.4f}"
            lines.append(f"{r['c']:>6g} {r['rho']:>5g} {r['n']:>5} "
                         f"{_ms(r['theta_se_mean'], r['theta_se_sd']):>20} {med:>12}")
    for name, rep in runs:
        if lines:
            lines.append("")
        lines.append(f"Fit {name}: selected {', '.join(rep['selected']) or '(none)'}; knots {rep['knots']}")
        if rep.get("msep") is not None:
            lines.append(f"{'model':>10} {'MSEP':>10}")
            lines.append(f"{'SSFPLSIM':>10} {rep['msep']:>10.4f}")
            if rep.get("baseline_msep") is not None:
                lines.append(f"{'SLM':>10} {rep['baseline_msep']:>10.4f}")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    d = Path(args.indir)
    if not d.is_dir():
        raise DataError(f"{d} is not a directory")
    summaries, runs = [], []
    for path in sorted(d.rglob("*.json")):
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from exc
        if isinstance(obj, dict) and "summary" in obj and "scenario" in obj:
            summaries.append(obj["summary"])
        elif isinstance(obj, dict) and "theta_coefficients" in obj:
            runs.append((str(path.relative_to(d)), obj))
    if not summaries and not runs:
        raise DataError(f"no reports found under {d}")
    text = format_tables(summaries, runs)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f'ssfplsim: error kind=usage message="{message}"\n')
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ssfplsim", description="Sparse semi-functional partial linear single-index regression.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run simulation scenarios")
    s.add_argument("--config", required=True, help="scenario config file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default ${THREADS_ENV} or 1)")
    s.add_argument("--M", type=int, default=None, help="override the replicate count")
    s.add_argument("--emit-data", action="store_true",
                   help="also write replicate 0 of each scenario as a dataset")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--schema", required=True)
    f.add_argument("--config", default=None, help="fit/model config (defaults if omitted)")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--knots", type=int, default=None, help="fixed number of interior knots")
    f.add_argument("--knots-grid", default=None, help="comma-separated knot counts searched by BIC")
    f.add_argument("--widen", action="store_true",
                   help="widen the bandwidth for test rows with an empty neighborhood")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("predict", help="predict with a saved report")
    r.add_argument("--model", required=True, help="report.json written by fit")
    r.add_argument("--data", required=True)
    r.add_argument("--schema", default=None, help="schema (defaults to the one stored in the model)")
    r.add_argument("--out", required=True, help="output CSV")
    r.add_argument("--widen", action="store_true")
    r.set_defaults(func=cmd_predict)

    t = sub.add_parser("report", help="tabulate the reports in a directory")
    t.add_argument("--in", dest="indir", required=True)
    t.add_argument("--out", default=None, help="also write the tables to this file")
    t.set_defaults(func=cmd_report)
    return p


_DATA_ERRORS = (DataError, GridMismatchError, OSError, DegenerateDirectionError)
_NUMERIC_ERRORS = (NoFeasibleFit, SingularDesign, NumericalDivergence, EmptyNeighborhood,
                   DegenerateProjection)


def _fail(kind: str, exc: BaseException, code: int) -> int:
    msg = str(exc).replace("\n", " ").replace('"', "'")
    sys.stderr.write(f'ssfplsim: error kind={kind} type={type(exc).__name__} message="{msg}"\n')
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except _NUMERIC_ERRORS as exc:
        return _fail("numerical", exc, EXIT_NUMERIC)
    except _DATA_ERRORS as exc:
        return _fail("data", exc, EXIT_DATA)
    except ValueError as exc:
        return _fail("data", exc, EXIT_DATA)
