"""
Command-line front end.

    simknock select    --data a.csv --data b.csv [--q 0.1] [--plus] ...
    simknock simulate  config.cfg [--out results.csv]
    simknock knockoffs --data a.csv --construction fixed-x --out ko.csv
    simknock diagnose  --data a.csv --knockoffs ko.csv --p-model P.csv --q-model Q.csv

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import csvio
from .baselines import (
    Method,
    _broadcast,
    default_construction,
    run_intersection,
    run_method,
    run_simultaneous,
)
from .combiners import CombinerSpec
from .diagnostics import kl_report
from .errors import ColumnMismatch, NumericalError, ValidationError
from .filter import SelectionReport
from .knockoffs import Construction, construct
from .screening import sis_screen
from .simulation import Scenario, Setting, SimConfig, run_grid
from .stats import Family

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
log = logging.getLogger("simknock")


def _q(text: str) -> float:
    try:
        q = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid q {text!r}") from None
    if not 0 < q < 1:
        raise argparse.ArgumentTypeError(f"q must lie in (0, 1); got {q}")
    return q


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simknock", description="Simultaneous knockoffs for mutual signals across studies.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sel = sub.add_parser("select", help="select features that are signals in every study")
    sel.add_argument("--data", action="append", required=True, metavar="CSV",
                     help="study dataset (response first); repeat once per study")
    sel.add_argument("--family", action="append", default=None,
                     help="gaussian or binomial; once for all studies or once per study")
    sel.add_argument("--construction", action="append", default=None,
                     help="fixed-x, second-order or model-x-gaussian (needs --model)")
    sel.add_argument("--model", action="append", default=None, metavar="CSV",
                     help="Gaussian model file for model-x-gaussian")
    sel.add_argument("--combiner", default=CombinerSpec.PRODUCT_DIFF.value,
                     choices=[c.value for c in CombinerSpec])
    sel.add_argument("--method", default=Method.SIMULTANEOUS.value,
                     choices=[m.value for m in Method])
    sel.add_argument("--force-continuous", action="store_true",
                     help="pooling only: standardise responses and fit a Gaussian lasso")
    sel.add_argument("--q", type=_q, default=0.1)
    sel.add_argument("--plus", action="store_true", help="use the knockoff+ threshold")
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--screen-top-d", type=int, default=None, metavar="D")
    sel.add_argument("--out", default=None, help="output CSV (default: stdout)")

    sim = sub.add_parser("simulate", help="Monte-Carlo FDR/power over a grid of settings")
    sim.add_argument("config", help="key = value config file")
    sim.add_argument("--out", default=None)

    ko = sub.add_parser("knockoffs", help="write a knockoff copy of a dataset")
    ko.add_argument("--data", required=True)
    ko.add_argument("--family", default="gaussian")
    ko.add_argument("--construction", default=Construction.FIXED_X.value,
                    choices=[c.value for c in Construction])
    ko.add_argument("--model", default=None, help="Gaussian model file (mean row + covariance)")
    ko.add_argument("--seed", type=int, default=0)
    ko.add_argument("--out", default=None)

    dg = sub.add_parser("diagnose", help="knockoff misspecification statistic per feature")
    dg.add_argument("--data", action="append", required=True)
    dg.add_argument("--knockoffs", action="append", required=True)
    dg.add_argument("--p-model", action="append", required=True)
    dg.add_argument("--q-model", action="append", required=True)
    dg.add_argument("--out", default=None)
    return parser


def _out(path):
    return sys.stdout if path in (None, "-") else path


# --------------------------------------------------------------------------
# select

def cmd_select(args) -> SelectionReport:
    k = len(args.data)
    families = [Family.parse(f) for f in _broadcast(args.family or ["gaussian"], k, "--family values")]
    exps = [csvio.read_dataset(path, fam) for path, fam in zip(args.data, families)]
    names = exps[0].x.column_names
    for path, e in zip(args.data[1:], exps[1:]):
        if e.x.column_names != names:
            raise ColumnMismatch(f"{path}: feature columns differ from {args.data[0]}")
    cons = [default_construction(f) if c is None else Construction.parse(c)
            for c, f in zip(_broadcast(args.construction, k, "--construction values"), families)]
    models = [csvio.read_model(m) if m else None
              for m in _broadcast(args.model, k, "--model files")]
    kept = np.arange(len(names))
    if args.screen_top_d is not None:
        exps, kept = sis_screen(exps, args.screen_top_d)

    method = Method.parse(args.method)
    if any(c is Construction.MODEL_X_GAUSSIAN for c in cons):
        if any(m is None for m in models):
            raise ValidationError("model-x-gaussian construction needs --model for every such study")
        if args.screen_top_d is not None:
            raise ValidationError("--screen-top-d cannot be combined with model-x-gaussian")
    if method is Method.SIMULTANEOUS:
        result = run_simultaneous(exps, cons, args.combiner, args.q, args.plus, args.seed,
                                  models=models)
    elif method is Method.INTERSECTION:
        result = run_intersection(exps, cons, args.q, args.plus, args.seed, models=models)
    else:
        if any(c is Construction.MODEL_X_GAUSSIAN for c in cons):
            raise ValidationError("pooling does not support model-x-gaussian")
        result = run_method(method, exps, cons, args.combiner, args.q, args.plus, args.seed,
                            force_continuous=args.force_continuous)

    config = {
        "command": "select", "data": list(args.data), "family": [f.value for f in families],
        "construction": [c.value for c in cons], "method": method.value,
        "combiner": args.combiner, "q": args.q, "plus": args.plus, "seed": args.seed,
        "screen_top_d": args.screen_top_d if args.screen_top_d is not None else "none",
    }
    if method is Method.INTERSECTION:
        # one filter vector and threshold per study
        ws = [r.w.w for r in result.report]
        w_header = [f"w_study{i + 1}" for i in range(len(ws))]
        threshold = "/".join(csvio.fmt(r.threshold) for r in result.report)
    else:
        ws = [result.report.w.w]
        w_header = ["w"]
        threshold = csvio.fmt(result.report.threshold)
    selected = set(result.selected)
    rows = [(names[j], *(w[i] for w in ws), int(i in selected)) for i, j in enumerate(kept)]
    header = ["feature", *w_header, "selected"]
    footer = [f"# summary: threshold={threshold}, q={csvio.fmt(args.q)}, "
              f"selected={len(selected)}"]
    csvio.write_rows(_out(args.out), header, rows, csvio.config_header(config), footer)
    chosen = ", ".join(names[kept[i]] for i in sorted(selected)) or "(none)"
    print(f"selected {len(selected)} feature(s): {chosen}", file=sys.stderr)
    return result.report


# --------------------------------------------------------------------------
# simulate

_SIM_FIELDS = {f.name for f in fields(SimConfig)}
_PER_STUDY = {"n", "s_solo", "s_pair", "rho", "sigma", "alpha"}
_INT_FIELDS = {"K", "p", "s0", "replicates", "seed"}
_BOOL_FIELDS = {"plus", "fixed_truth"}
_EXTRA = {"methods", "combiner"}


def _parse_bool(key: str, text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"config field {key!r}: expected a boolean, got {text!r}")


def _convert(key: str, text: str):
    try:
        if key in _PER_STUDY:
            cast = float if key in ("rho", "sigma", "alpha") else int
            parts = [cast(v) for v in text.split("/")]
            return tuple(parts) if len(parts) > 1 else parts[0]
        if key in _INT_FIELDS:
            return int(text)
        if key in _BOOL_FIELDS:
            return _parse_bool(key, text)
        if key == "scenario":
            return Scenario(text.lower()).value
        if key == "setting":
            return Setting(text.lower()).value
        if key == "combiner":
            return CombinerSpec.parse(text).value
        if key == "mutual_amplitude" and text.lower() == "none":
            return None
        return float(text)
    except ValidationError:
        raise
    except ValueError:
        if key == "scenario":
            valid = ", ".join(s.value for s in Scenario)
        elif key == "setting":
            valid = ", ".join(s.value for s in Setting)
        else:
            valid = None
        hint = f"; valid values: {valid}" if valid else ""
        raise ValidationError(f"config field {key!r}: invalid value {text!r}{hint}") from None


def load_sim_config(path) -> tuple[list[dict], list[Method]]:
    """Parse and validate a simulation config into grid points and methods."""
    text = Path(path).read_text()
    raw = csvio.parse_config(text, str(path))
    unknown = set(raw) - _SIM_FIELDS - _EXTRA
    if unknown:
        raise ValidationError(
            f"unknown config field(s) {sorted(unknown)}; valid fields: "
            f"{sorted(_SIM_FIELDS | _EXTRA)}")
    methods = [Method.parse(m) for m in raw.pop("methods", [m.value for m in Method])]
    axes = {key: [_convert(key, v) for v in values] for key, values in raw.items()}
    axes.setdefault("combiner", [CombinerSpec.PRODUCT_DIFF.value])
    points = csvio.expand_grid(axes)
    for point in points:
        cfg_kwargs = {k: v for k, v in point.items() if k in _SIM_FIELDS}
        SimConfig(**cfg_kwargs)  # validate every grid point before running any
    return points, methods


def cmd_simulate(args) -> list[dict]:
    points, methods = load_sim_config(args.config)
    varying = [k for k in points[0]] if points else []
    out_rows = []
    for point in points:
        cfg = SimConfig(**{k: v for k, v in point.items() if k in _SIM_FIELDS})
        results = run_grid(cfg, methods, point["combiner"])
        for res in results:
            out_rows.append({**point, "method": res.method.value, "fdr_hat": res.fdr_hat,
                             "fdr_se": res.fdr_se, "power_hat": res.power_hat,
                             "power_se": res.power_se, "failures": res.failures,
                             "replicates_run": res.replicates_run})
    header = varying + ["method", "fdr_hat", "fdr_se", "power_hat", "power_se",
                        "failures", "replicates_run"]
    rows = [[_cell(r[h]) for h in header] for r in out_rows]
    comments = ["# command=simulate", f"# config={args.config}",
                f"# methods={'/'.join(m.value for m in methods)}"]
    defaults = {f.name: f.default for f in fields(SimConfig) if f.name not in varying}
    comments += csvio.config_header(defaults)
    csvio.write_rows(_out(args.out), header, rows, comments)
    return out_rows


def _cell(value):
    if isinstance(value, tuple):
        return "/".join(csvio.fmt(v) for v in value)
    if value is None:
        return "none"
    return value


# --------------------------------------------------------------------------
# knockoffs / diagnose

def cmd_knockoffs(args):
    exp = csvio.read_dataset(args.data, args.family)
    method = Construction.parse(args.construction)
    model = csvio.read_model(args.model) if args.model else None
    if method is Construction.MODEL_X_GAUSSIAN and model is None:
        raise ValidationError("model-x-gaussian construction requires --model")
    kc = construct(exp.x, method, args.seed, model=model)
    config = {"command": "knockoffs", "data": args.data, "construction": method.value,
              "seed": args.seed, "model": args.model or "none",
              "scale": "unit-norm columns" if method is Construction.FIXED_X else "original"}
    csvio.write_knockoffs(_out(args.out), exp.x.column_names, kc.xtilde, kc.s, config)
    return kc


def cmd_diagnose(args):
    k = len(args.data)
    knock = _broadcast(args.knockoffs, k, "--knockoffs files")
    pm = [csvio.read_model(p) for p in _broadcast(args.p_model, k, "--p-model files")]
    qm = [csvio.read_model(q) for q in _broadcast(args.q_model, k, "--q-model files")]
    xs, xts = [], []
    for path, kpath in zip(args.data, knock):
        exp = csvio.read_dataset(path)
        names, xt, _ = csvio.read_knockoffs(kpath)
        if tuple(names) != exp.x.column_names:
            raise ValidationError(f"{kpath}: knockoff columns do not match {path}")
        xs.append(exp.x)
        xts.append(xt)
    report = kl_report(xs, xts, pm, qm)
    names = xs[0].column_names
    rows = [[f"study{i + 1}", *row] for i, row in enumerate(report.kl_hat)]
    rows.append(["min", *report.min_over_studies])
    config = {"command": "diagnose", "data": list(args.data), "knockoffs": knock,
              "p_model": list(args.p_model), "q_model": list(args.q_model)}
    csvio.write_rows(_out(args.out), ["study", *names], rows, csvio.config_header(config))
    return report


COMMANDS = {"select": cmd_select, "simulate": cmd_simulate,
            "knockoffs": cmd_knockoffs, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or an argparse usage error
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"simknock {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"simknock {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"simknock {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
