"""Command-line entry point.

    python -m nkpclearn simulate --scenario A --n 2000 --seed 7 -o path.csv
    python -m nkpclearn estimate --input data.csv --pi-col pi --y-col y
    python -m nkpclearn roots --input data.csv
    python -m nkpclearn bands --input data.csv --alpha 0.10 --B 999 -o band.tsv
    python -m nkpclearn supf --input data.csv --B 999
    python -m nkpclearn mc --scenario A --sizes 1000 2000 --reps 500
    python -m nkpclearn replay run.record.json

Every command writes a run record (config echo, version, wall time, results) to
``--record`` or, when ``--output`` is given, next to it as ``<output>.record.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .domain import (
    AuxParams,
    BoundaryHit,
    Dataset,
    DegenerateDenominator,
    DegenerateScale,
    DegenerateVariance,
    InvalidData,
    Lambda,
    NkpcError,
    NoRootFound,
    NotPositiveDefinite,
    OutOfParamSpace,
    ParamSpace,
    SingularDesign,
    StructuralParams,
    THETA_NAMES,
)
from .equilibria import GCurve, find_roots
from .estimation import NlsOptions, assemble_lambda, fit_ar1, fit_nls
from .filter import InitPolicy
from .harness import McAborted, builtin_scenario, run_mc, summarize_to_table
from .inference import influence_panel, root_pointwise_ci, supf_test, uniform_band, wald
from .simulator import SimConfig, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_EQUILIBRIA = 4
EXIT_INFERENCE = 5
EXIT_MC = 6

_EXIT_MAP = (
    (McAborted, EXIT_MC),
    ((InvalidData, OutOfParamSpace), EXIT_CONFIG),
    ((SingularDesign, DegenerateVariance, NotPositiveDefinite), EXIT_ESTIMATION),
    ((NoRootFound, DegenerateDenominator), EXIT_EQUILIBRIA),
    (DegenerateScale, EXIT_INFERENCE),
)


class ConfigError(Exception):
    pass


@dataclass
class RunRecord:
    config: dict
    version: str
    wall_time: float
    results: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


# --- data ingestion --------------------------------------------------------------

def pct_change(v: np.ndarray) -> np.ndarray:
    """``100 (v_t / v_{t-1} - 1)``; one observation shorter than ``v``."""
    v = np.asarray(v, dtype=float)
    return 100.0 * (v[1:] / v[:-1] - 1.0)


def read_series(path, pi_col: str = "pi", y_col: str = "y", pi_transform: str = "level",
                y_transform: str = "level", label_col: Optional[str] = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None:
            raise InvalidData("empty CSV (header row required)")
        for col in (pi_col, y_col):
            if col not in rd.fieldnames:
                raise InvalidData(f"column {col!r} not in header {rd.fieldnames}")
        pis, ys, labels = [], [], []
        for i, row in enumerate(rd, start=2):
            vals = []
            for col in (pi_col, y_col):
                raw = (row.get(col) or "").strip()
                try:
                    v = float(raw)
                except ValueError:
                    raise InvalidData(f"row {i}: bad or missing value {raw!r} in column {col!r}")
                if not np.isfinite(v):
                    raise InvalidData(f"row {i}: non-finite value in column {col!r}")
                vals.append(v)
            pis.append(vals[0])
            ys.append(vals[1])
            labels.append(row.get(label_col) if label_col else str(i - 1))
    pi, y = np.array(pis), np.array(ys)
    shift = 0
    for name, tr in (("pi", pi_transform), ("y", y_transform)):
        if tr not in ("level", "pct_change"):
            raise ConfigError(f"unknown transform {tr!r} for {name}")
    if pi_transform == "pct_change" or y_transform == "pct_change":
        shift = 1
    if pi_transform == "pct_change":
        pi = pct_change(pi)
    else:
        pi = pi[shift:]
    if y_transform == "pct_change":
        y = pct_change(y)
    else:
        y = y[shift:]
    return Dataset(pi, y, labels[shift:])


# --- parser ----------------------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--input", "-i", required=True, help="CSV with a header row")
    p.add_argument("--pi-col", default="pi")
    p.add_argument("--y-col", default="y")
    p.add_argument("--pi-transform", choices=("level", "pct_change"), default="level")
    p.add_argument("--y-transform", choices=("level", "pct_change"), default="level")
    p.add_argument("--gamma-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--delta-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--psi-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--two-sided-delta", action="store_true")
    p.add_argument("--init", choices=("first_obs", "estimated", "fixed"), default="first_obs")
    p.add_argument("--init-value", type=float)
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--step", type=float, help="numerical Hessian step (default 0.01 n^-1/4)")


GLOBAL_DEFAULTS = {"seed": 0, "threads": 1, "output": None, "format": None, "record": None}


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the subcommand copy suppresses defaults so flags given before the
    # subcommand are not overwritten
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda k: argparse.SUPPRESS) if suppress else GLOBAL_DEFAULTS.get
    p.add_argument("--seed", type=int, default=d("seed"))
    p.add_argument("--threads", type=int, default=d("threads"))
    p.add_argument("--output", "-o", default=d("output"), help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv", "tsv"), default=d("format"))
    p.add_argument("--record", default=d("record"), help="run record path")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    ap = argparse.ArgumentParser(prog="nkpclearn", parents=[_global_flags(suppress=False)],
                                 description="Learning-augmented Phillips curve toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a path to CSV")
    p.add_argument("--scenario", default="A")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--init-pi", type=float, default=0.0)
    p.add_argument("--init-y", type=float)
    for name in ("gamma", "delta", "psi", "a", "rho", "sigma-u", "sigma-eps"):
        p.add_argument(f"--{name}", type=float, help="override the scenario value")

    p = sub.add_parser("estimate", parents=[common], help="NLS + AR(1) + Wald")
    _add_data_args(p)

    p = sub.add_parser("roots", parents=[common], help="behavioural equilibria")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", "-i")
    src.add_argument("--lambda", dest="lam", nargs=5, type=float,
                     metavar=("DELTA", "PSI", "RHO", "SU2", "SE2"))
    p.add_argument("--pi-col", default="pi")
    p.add_argument("--y-col", default="y")
    p.add_argument("--pi-transform", choices=("level", "pct_change"), default="level")
    p.add_argument("--y-transform", choices=("level", "pct_change"), default="level")
    p.add_argument("--init", choices=("first_obs", "estimated", "fixed"), default="first_obs")
    p.add_argument("--init-value", type=float)
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--step", type=float)
    p.add_argument("--gamma-range", nargs=2, type=float)
    p.add_argument("--delta-range", nargs=2, type=float)
    p.add_argument("--psi-range", nargs=2, type=float)
    p.add_argument("--two-sided-delta", action="store_true")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--g-curve", help="write (beta, G) TSV here")

    p = sub.add_parser("bands", parents=[common], help="uniform confidence band for G")
    _add_data_args(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--B", type=int, default=999)
    p.add_argument("--mode", choices=("studentized", "percentile"), default="studentized")
    p.add_argument("--band-grid", type=int, default=401)

    p = sub.add_parser("supf", parents=[common], help="supF test of delta = 0")
    _add_data_args(p)
    p.add_argument("--B", type=int, default=999)
    p.add_argument("--no-intercept", action="store_true",
                   help="partial out y only in the bootstrap")

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo tables")
    p.add_argument("--scenario", default="A")
    p.add_argument("--sizes", nargs="+", type=int, default=[250, 500, 1000, 2000])
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--B", type=int, default=199)
    p.add_argument("--supf-B", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--init", choices=("true", "first_obs", "estimated"), default="true")
    p.add_argument("--paper-scale", action="store_true", help="2000 reps and B = 4999")
    p.add_argument("--records", help="write per-replication CSV here")

    p = sub.add_parser("replay", parents=[common], help="re-run a recorded command")
    p.add_argument("record_path")
    return ap


# --- helpers ---------------------------------------------------------------------

def _space(args) -> ParamSpace:
    kw = {}
    for name in ("gamma", "delta", "psi"):
        rng = getattr(args, f"{name}_range", None)
        if rng:
            kw[f"{name}_lo"], kw[f"{name}_hi"] = rng
    try:
        return ParamSpace(two_sided_delta=getattr(args, "two_sided_delta", False), **kw)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _init(args) -> InitPolicy:
    if args.init == "fixed":
        if args.init_value is None:
            raise ConfigError("--init fixed needs --init-value")
        return InitPolicy.fixed(args.init_value)
    return InitPolicy(args.init)


def _data(args) -> Dataset:
    return read_series(args.input, args.pi_col, args.y_col, args.pi_transform, args.y_transform)


def _fit(args, data):
    space = _space(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundaryHit)
        nls = fit_nls(data, space, _init(args), NlsOptions(grid_size=args.grid_size))
    notes = [str(c.message) for c in caught if issubclass(c.category, BoundaryHit)]
    ar = fit_ar1(data)
    lf = assemble_lambda(nls, ar)
    return space, nls, ar, lf, notes


def _emit(args, text: str):
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_text(header, rows, fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="," if fmt == "csv" else "\t", lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def estimate_report(data: Dataset, nls, ar, lf, w) -> dict:
    """Summary table: point estimates with standard errors and 95% intervals."""
    ci = w.conf_int(0.05)
    params = {}
    for i, name in enumerate(THETA_NAMES):
        params[name] = {"estimate": float(w.theta_hat.as_array()[i]),
                        "se": float(w.std_errors[i]), "ci_95": ci[i].tolist()}
    params["rho"] = {"estimate": ar.rho_hat}
    params["sigma_u"] = {"estimate": float(np.sqrt(nls.sigma_u_sq_hat))}
    params["sigma_eps"] = {"estimate": float(np.sqrt(ar.sigma_eps_sq_hat))}
    return {"n": data.n, "params": params, "lambda": lf.to_dict(), "nls": nls.to_dict(),
            "ar1": ar.to_dict(), "wald": w.to_dict()}


# --- commands --------------------------------------------------------------------

def cmd_simulate(args) -> dict:
    try:
        scn = builtin_scenario(args.scenario)
    except KeyError as exc:
        raise ConfigError(exc.args[0])
    th, aux = scn.theta, scn.aux
    over = {k: getattr(args, k) for k in ("gamma", "delta", "psi") if getattr(args, k) is not None}
    th = StructuralParams(**{**asdict(th), **over})
    aux_over = {k: getattr(args, k) for k in ("a", "rho", "sigma_u", "sigma_eps")
                if getattr(args, k) is not None}
    aux = AuxParams(**{**asdict(aux), **aux_over})
    try:
        cfg = SimConfig(th, aux, args.n, burn_in=args.burn_in, seed=args.seed,
                        init_pi=args.init_pi, init_y=args.init_y)
    except ValueError as exc:
        raise ConfigError(str(exc))
    path = simulate(cfg)
    if args.output:
        path.to_csv(args.output)
    else:
        sys.stdout.write(path.csv_text())
    return {"n": path.n, "theta": asdict(th), "aux": asdict(aux), "output": args.output}


def cmd_estimate(args) -> dict:
    data = _data(args)
    space, nls, ar, lf, notes = _fit(args, data)
    w = wald(data, nls, args.step, space)
    rep = estimate_report(data, nls, ar, lf, w)
    rep["warnings"] = notes
    fmt = args.format or "json"
    if fmt == "json":
        _emit(args, json.dumps(rep, indent=2, default=_json_default) + "\n")
    else:
        rows = []
        for name, e in rep["params"].items():
            lo, hi = e.get("ci_95", (None, None))
            rows.append((name, e["estimate"], e.get("se", ""), lo if lo is not None else "",
                         hi if hi is not None else ""))
        _emit(args, _rows_text(("param", "estimate", "se", "ci_lo", "ci_hi"), rows, fmt))
    return rep


def cmd_roots(args) -> dict:
    out: dict = {}
    if args.lam is not None:
        lam = Lambda(*args.lam)
        panel = None
    else:
        data = _data(args)
        space, nls, ar, lf, notes = _fit(args, data)
        lam = lf.lambda_hat
        w = wald(data, nls, args.step, space)
        panel = influence_panel(data, nls, ar, w.A_n)
        out["warnings"] = notes
    rep = find_roots(lam)
    out["report"] = rep.to_dict()
    if panel is not None:
        out["intervals"] = [asdict(ci) for ci in root_pointwise_ci(rep, panel, alpha=args.alpha)]
    if args.g_curve:
        GCurve.from_lambda(lam).to_tsv(args.g_curve)
    fmt = args.format or "json"
    if fmt == "json":
        _emit(args, json.dumps(out, indent=2, default=_json_default) + "\n")
    else:
        rows = list(zip(rep.roots, rep.classification, rep.g_beta))
        _emit(args, _rows_text(("beta", "classification", "g_beta"), rows, fmt))
    return out


def cmd_bands(args) -> dict:
    data = _data(args)
    space, nls, ar, lf, notes = _fit(args, data)
    w = wald(data, nls, args.step, space)
    panel = influence_panel(data, nls, ar, w.A_n)
    band = uniform_band(lf, panel, args.band_grid, args.alpha, args.B, args.seed, args.mode)
    fmt = args.format or "tsv"
    if fmt == "json":
        _emit(args, json.dumps(band.to_dict(), indent=2) + "\n")
    else:
        rows = list(zip(band.beta_grid, band.g_hat, band.band_lo, band.band_hi))
        _emit(args, _rows_text(("grid", "G", "lo", "hi"), [tuple(map(float, r)) for r in rows], fmt))
    return {"band": band.to_dict(), "warnings": notes}


def cmd_supf(args) -> dict:
    data = _data(args)
    rep = supf_test(data, _space(args), args.B, args.seed, _init(args), args.grid_size,
                    intercept=not args.no_intercept)
    res = rep.to_dict()
    fmt = args.format or "json"
    if fmt == "json":
        _emit(args, json.dumps({k: res[k] for k in ("statistic", "gamma_argmax", "p_value", "B")},
                               indent=2) + "\n")
    else:
        _emit(args, _rows_text(("statistic", "gamma_argmax", "p_value", "B"),
                               [(rep.statistic, rep.gamma_argmax, rep.p_value, rep.B)], fmt))
    return res


def cmd_mc(args) -> dict:
    reps, B = (2000, 4999) if args.paper_scale else (args.reps, args.B)
    try:
        scn = builtin_scenario(args.scenario, sample_sizes=tuple(args.sizes), reps=reps,
                               bootstrap_B=B, band_alpha=args.alpha, seed=args.seed,
                               init=args.init, supf_B=args.supf_B)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc.args[0]))
    summary = run_mc(scn, threads=args.threads)
    if args.records:
        summary.records_csv(args.records)
    fmt = args.format or "csv"
    if fmt == "json":
        _emit(args, summary.to_json(indent=2) + "\n")
    else:
        _emit(args, summarize_to_table(summary, fmt))
    return json.loads(summary.to_json())


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "roots": cmd_roots,
            "bands": cmd_bands, "supf": cmd_supf, "mc": cmd_mc}


def _exit_code(exc: BaseException) -> int:
    for types, code in _EXIT_MAP:
        if isinstance(exc, types):
            return code
    if isinstance(exc, (ConfigError, ValueError)):
        return EXIT_CONFIG
    if isinstance(exc, NkpcError):
        return EXIT_ESTIMATION
    return 1


def _record_path(args) -> Optional[Path]:
    if args.record:
        return Path(args.record)
    if args.output:
        return Path(str(args.output) + ".record.json")
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "replay":
        try:
            rec = json.loads(Path(args.record_path).read_text())
            argv = rec["config"]["argv"]
        except (OSError, KeyError, ValueError) as exc:
            print(f"error: cannot read run record: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        extra = []
        if args.output:
            extra += ["--output", args.output]
        if args.record:
            extra += ["--record", args.record]
        return main(list(argv) + extra)

    t0 = time.perf_counter()
    try:
        results = COMMANDS[args.command](args)
    except Exception as exc:  # mapped to exit codes below
        code = _exit_code(exc)
        if code == 1:
            raise
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return code
    record = RunRecord({"argv": argv, "command": args.command,
                        **{k: v for k, v in vars(args).items() if k != "command"}},
                       __version__, time.perf_counter() - t0, results)
    path = _record_path(args)
    if path is not None:
        path.write_text(record.to_json() + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
