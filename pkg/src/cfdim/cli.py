"""Command-line front end.

Exit status: 0 on success, 1 on usage or domain errors, 2 when a numerical
method fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from . import cantor, classify, pressure
from .errors import (BudgetExceeded, ConvergenceError, DomainError, HypothesisError,
                     PrecisionError, SpecError)

__all__ = ["RunConfig", "UsageError", "build_parser", "parse", "dispatch", "emit_curve_data", "main"]

CURVE_COLUMNS = ["B", "m", "M", "s_star", "residual"]
JOINT_COLUMNS = ["B", "M", "s_B", "t_B", "ordered"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    output_format: str = "json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from exc


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("construction spec")
    g.add_argument("--spec", help="JSON spec file (fields B, s, M, L, n_seq, epsilon0, k0)")
    g.add_argument("--B", type=str, help="growth base, rational allowed (e.g. 4 or 5/2)")
    g.add_argument("--s", type=str, help="exponent s in (0, 1), rational allowed")
    g.add_argument("--M", type=int, default=1, help="alphabet bound (default 1)")
    g.add_argument("--L", type=int, default=1, help="block length (default 1)")
    g.add_argument("--n-seq", type=_csv_ints, help="peak positions, e.g. 2,6,14")
    g.add_argument("--count", type=int, default=3, help="peaks to generate when --n-seq is absent")
    g.add_argument("--mode", choices=["geometric", "doubling"], default="doubling",
                   help="generator for the peak positions")
    g.add_argument("--gamma", type=float, default=4.0, help="growth factor of the geometric generator")
    g.add_argument("--start", type=int, help="first peak position for the generator")
    g.add_argument("--epsilon0", type=float, help="override the computed epsilon0")


def _add_phi_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--phi", required=True,
                   help="growth function: geometric:B | power:p[:scale] | "
                        "doubly-exponential:b[:c] | tower:p (exp(exp(n^p))) | table:FILE")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cfdim", description="Dimension numbers and Cantor constructions for "
                 "continued fractions with growing partial quotients.")
    ap.add_argument("--format", choices=["json", "csv"], default="json", dest="output_format",
                    help="output format where a command supports both")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the pressure equation for s_B (m=1), t_B (m=2) or the m-fold number")
    p.add_argument("--B", type=float, required=True, help="growth base, must exceed 1")
    p.add_argument("--M", type=int, default=50, help="alphabet truncation (default 50)")
    p.add_argument("--m", type=int, default=2, help="product order (default 2)")
    p.add_argument("--tol", type=float, default=pressure.DEFAULT_TOL, help="bisection tolerance")
    p.add_argument("--degree", type=int, default=pressure.DEFAULT_DEGREE, help="collocation degree")
    p.add_argument("--no-tail", action="store_true", help="restrict to digits 1..M instead of folding in the rest")

    p = sub.add_parser("curve", help="dimension numbers over a grid of B")
    p.add_argument("--grid", type=_csv_floats, help="comma-separated B values")
    p.add_argument("--grid-file", help="file with one B value per line (or comma-separated)")
    p.add_argument("--M", type=int, default=50, help="alphabet truncation (default 50)")
    p.add_argument("--m", type=int, default=2, help="product order (default 2)")
    p.add_argument("--joint", action="store_true", help="emit s_B and t_B side by side")
    p.add_argument("--tol", type=float, default=pressure.DEFAULT_TOL, help="bisection tolerance")
    p.add_argument("--degree", type=int, default=pressure.DEFAULT_DEGREE, help="collocation degree")
    p.add_argument("--no-tail", action="store_true", help="restrict to digits 1..M")

    p = sub.add_parser("partition", help="depth-n partition sum and its root")
    p.add_argument("--n", type=int, required=True, help="depth")
    p.add_argument("--B", type=float, required=True, help="growth base (>= 1; 1 drops the growth weight)")
    p.add_argument("--M", type=int, default=50, help="alphabet bound (default 50)")
    p.add_argument("--m", type=int, default=2, help="product order (default 2)")
    p.add_argument("--s", type=float, help="evaluate the sum at this s instead of solving")
    p.add_argument("--method", choices=["auto", "enumeration", "prefix-recursive"], default="auto",
                   help="summation method")
    p.add_argument("--tol", type=float, default=pressure.DEFAULT_TOL, help="bisection tolerance")

    p = sub.add_parser("construct", help="validate a Cantor spec and dump a level")
    _add_spec_args(p)
    p.add_argument("--level", type=int, help="dump this level as CSV")

    p = sub.add_parser("holder", help="minimum local exponent of the measure at a level")
    _add_spec_args(p)
    p.add_argument("--level", type=int, required=True, help="level to scan")
    p.add_argument("--slack", type=float, default=0.0, help="slack subtracted from the bound")

    p = sub.add_parser("sample", help="draw mu-random points of the construction")
    _add_spec_args(p)
    p.add_argument("--depth", type=int, required=True, help="word length")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--samples", type=int, default=1, help="number of points (seeds seed..seed+k-1)")

    p = sub.add_parser("boxdim", help="box-counting estimate over a ladder of levels")
    _add_spec_args(p)
    p.add_argument("--levels", type=_csv_ints, required=True, help="ladder levels, e.g. 6,8,10")

    p = sub.add_parser("classify", help="growth exponents, membership or dimension prediction for Phi")
    _add_phi_args(p)
    p.add_argument("--N", type=int, default=200, help="truncation (default 200)")
    p.add_argument("--digits", help="JSON array of partial quotients (or @FILE) for a membership scan")
    p.add_argument("--set", choices=["E1", "E2", "F"], default="E2", dest="set_tag", help="set to test")
    p.add_argument("--tail-fraction", type=float, default=0.5, help="tail window fraction")
    p.add_argument("--predict", action="store_true", help="predict the Hausdorff dimension")
    p.add_argument("--M", type=int, default=50, help="alphabet truncation for prediction")
    p.add_argument("--tol", type=float, default=pressure.DEFAULT_TOL, help="solver tolerance")

    p = sub.add_parser("montecarlo", help="zero-one-law experiment under the Gauss measure")
    _add_phi_args(p)
    p.add_argument("--S", type=int, default=10**5, help="samples (default 1e5)")
    p.add_argument("--N", type=int, default=1000, help="truncation (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--law", choices=["borel-bernstein", "kw"], default="borel-bernstein",
                   help="single-digit or consecutive-product events")
    p.add_argument("--sampling", choices=["stationary", "exact"], default="stationary",
                   help="i.i.d. Gauss digits or expansions of random reals")
    for sp in sub.choices.values():
        # accepted after the subcommand too
        sp.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS,
                        dest="output_format", help="output format where the command supports both")
    return ap


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _validate(cmd: str, a: dict) -> None:
    if cmd in ("solve", "curve"):
        if cmd == "solve":
            _require(a["B"] > 1, "--B: B must exceed 1")
        _require(a["M"] >= 1, "--M: M must be >= 1")
        _require(a["m"] >= 1, "--m: m must be >= 1")
        _require(a["tol"] > 0, "--tol: must be positive")
        _require(a["degree"] >= 4, "--degree: must be >= 4")
    if cmd == "curve":
        _require(bool(a.get("grid")) or bool(a.get("grid_file")), "curve needs --grid or --grid-file")
    if cmd == "partition":
        _require(a["n"] >= 1, "--n: depth must be >= 1")
        _require(a["B"] >= 1, "--B: B must be >= 1")
        _require(a["M"] >= 1, "--M: M must be >= 1")
        _require(a["m"] >= 1, "--m: m must be >= 1")
        _require(a["s"] is None or 0 <= a["s"] <= 1, "--s: must lie in [0, 1]")
    if cmd in ("construct", "holder", "sample", "boxdim"):
        _require(a.get("spec") is not None or (a.get("B") is not None and a.get("s") is not None),
                 "need --spec or both --B and --s")
        _require(a["M"] >= 1, "--M: M must be >= 1")
        _require(a["L"] >= 1, "--L: L must be >= 1")
    if cmd == "sample":
        _require(a["depth"] >= 1, "--depth: must be >= 1")
        _require(a["samples"] >= 1, "--samples: must be >= 1")
    if cmd in ("holder",):
        _require(a["level"] >= 1, "--level: must be >= 1")
    if cmd == "classify":
        _require(a["N"] >= 1, "--N: must be >= 1")
        _require(0 < a["tail_fraction"] <= 1, "--tail-fraction: must lie in (0, 1]")
    if cmd == "montecarlo":
        _require(a["S"] >= 1 and a["N"] >= 1, "--S and --N must be >= 1")


def parse(argv) -> RunConfig:
    """argv -> RunConfig, raising UsageError naming the offending flag."""
    argv = list(argv)
    parser = build_parser()
    if not argv:
        raise UsageError(parser.format_usage().strip())
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError(parser.format_usage().strip())
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "output_format")}
    _validate(ns.command, params)
    return RunConfig(ns.command, params, ns.output_format)


# -- output helpers ------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_curve_data(rows, columns=CURVE_COLUMNS) -> str:
    """Plot-ready CSV: rows sorted by B, duplicate B keep the last entry."""
    rows = list(rows)
    if not rows:
        raise DomainError("empty table")
    by_b = {}
    for r in rows:
        b = float(r["B"])
        if b in by_b:
            warnings.warn(f"duplicate B = {b!r}; keeping the last entry", stacklevel=2)
        by_b[b] = r
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for b in sorted(by_b):
        w.writerow([_fmt(by_b[b].get(c)) for c in columns])
    return buf.getvalue()


def _clean(o):
    # strict JSON: non-finite floats become strings, exotic scalars str()
    if isinstance(o, float):
        return o if math.isfinite(o) else str(o)
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if o is None or isinstance(o, (bool, int, str)):
        return o
    return str(o)


def _dump(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def _spec_from(a: dict) -> cantor.CantorSpec:
    if a.get("spec"):
        with open(a["spec"]) as fh:
            spec = cantor.spec_from_json(fh.read())
    else:
        try:
            B, s = Fraction(a["B"]), Fraction(a["s"])
        except ValueError as exc:
            raise UsageError(f"--B/--s: {exc}") from exc
        seq = a.get("n_seq")
        if seq is None:
            if a["mode"] == "doubling":
                seq = cantor.generate_n_seq(a["count"], a["L"], start=a.get("start"), mode="doubling")
            else:
                seq = cantor.generate_n_seq(a["count"], a["L"], a["gamma"], a.get("start"))
        spec = cantor.CantorSpec(B, s, a["M"], a["L"], tuple(seq), a.get("epsilon0"))
    return cantor.validate_spec(spec)


def _phi_from(text: str) -> classify.GrowthFunction:
    kind, _, rest = text.partition(":")
    args = [x for x in rest.split(":") if x] if rest else []
    try:
        if kind == "geometric" and len(args) == 1:
            return classify.geometric(Fraction(args[0]))
        if kind == "power" and 1 <= len(args) <= 2:
            p = float(args[0])
            p = int(p) if p.is_integer() else p
            return classify.power(p, Fraction(args[1]) if len(args) > 1 else 1)
        if kind == "doubly-exponential" and 1 <= len(args) <= 2:
            return classify.doubly_exponential(float(args[0]), float(args[1]) if len(args) > 1 else 1.0)
        if kind == "tower" and len(args) == 1:
            p = float(args[0])
            return classify.from_loglog(lambda n: n**p, f"exp(exp(n^{args[0]}))")
        if kind == "table" and len(args) == 1:
            with open(args[0]) as fh:
                return classify.table(json.load(fh), f"table:{args[0]}")
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--phi: {exc}") from exc
    raise UsageError(f"--phi: cannot read {text!r}")


def _read_grid(a: dict) -> list[float]:
    grid = list(a.get("grid") or [])
    if a.get("grid_file"):
        with open(a["grid_file"]) as fh:
            grid += _csv_floats(fh.read().replace("\n", ","))
    return grid


def _read_digits(text: str) -> list[int]:
    if text.startswith("@"):
        with open(text[1:]) as fh:
            text = fh.read()
    try:
        return [int(x) for x in json.loads(text)]
    except (ValueError, TypeError) as exc:
        raise UsageError(f"--digits: {exc}") from exc


# -- dispatch -------------------------------------------------------------------


def _run(cfg: RunConfig, out) -> None:
    a = cfg.params
    cmd = cfg.command
    if cmd == "solve":
        r = pressure.solve_dimension(a["B"], a["M"], a["m"], a["tol"], a["degree"], tail=not a["no_tail"])
        if cfg.output_format == "csv":
            out.write(emit_curve_data([{"B": a["B"], "m": a["m"], "M": a["M"],
                                        "s_star": r.value, "residual": r.residual}]))
        else:
            out.write(_dump(r.to_record()) + "\n")
    elif cmd == "curve":
        grid = sorted(_read_grid(a))
        if a["joint"]:
            rows = pressure.joint_curve(grid, a["M"], a["tol"], a["degree"], tail=not a["no_tail"])
            cols = JOINT_COLUMNS
        else:
            curve = pressure.dimension_curve(grid, a["M"], a["m"], a["tol"], a["degree"], tail=not a["no_tail"])
            rows = curve.rows()
            cols = CURVE_COLUMNS
            for v in curve.violations:
                print(f"warning: {v}", file=sys.stderr)
            for p in curve.points:
                if p.error:
                    print(f"warning: B={p.B}: {p.error}", file=sys.stderr)
        if cfg.output_format == "json":
            out.write(_dump(rows) + "\n")
        else:
            out.write(emit_curve_data(rows, cols))
    elif cmd == "partition":
        if a["s"] is not None:
            ps = pressure.partition_sum(a["n"], pressure.PressureProblem(a["M"], a["B"], a["m"], a["s"]), a["method"])
            out.write(_dump({"n": ps.n, "log_value": ps.value.log, "value": float(ps.value),
                             "method": ps.method}) + "\n")
        else:
            r = pressure.solve_depth_dimension(a["n"], a["B"], a["M"], a["m"], a["tol"], a["method"])
            out.write(_dump(r.to_record()) + "\n")
    elif cmd == "construct":
        spec = _spec_from(a)
        if a.get("level"):
            out.write(cantor.level_csv(spec, a["level"]))
        else:
            rec = json.loads(cantor.spec_to_json(spec))
            rec.update({"alpha": float(spec.alpha), "peaks": {str(k): v for k, v in spec.peaks.items()},
                        "post_ranges": {str(k): list(v) for k, v in spec.post_ranges.items()},
                        "m_k": list(spec.m_k)})
            out.write(_dump(rec) + "\n")
    elif cmd == "holder":
        r = cantor.holder_scan(_spec_from(a), a["level"], a["slack"])
        out.write(_dump({"level": r.level, "exponent": r.exponent, "argmin": list(r.argmin),
                         "bound": r.bound, "ok": r.ok, "count": r.count}) + "\n")
    elif cmd == "sample":
        spec = _spec_from(a)
        recs = []
        for k in range(a["samples"]):
            sp = cantor.sample_point(spec, a["depth"], a["seed"] + k)
            recs.append({"seed": a["seed"] + k, "word": list(sp.word), "point": sp.point,
                         "exact": {"num": str(sp.exact.numerator), "den": str(sp.exact.denominator)}})
        out.write(_dump(recs if a["samples"] > 1 else recs[0]) + "\n")
    elif cmd == "boxdim":
        r = cantor.box_dimension_estimate(_spec_from(a), a["levels"])
        out.write(_dump(asdict(r)) + "\n")
    elif cmd == "classify":
        phi = _phi_from(a["phi"])
        rec = {"phi": phi.to_record()}
        if a.get("digits"):
            v = classify.membership(_read_digits(a["digits"]), phi, a["set_tag"], None, a["tail_fraction"])
            rec["membership"] = asdict(v)
        if a["predict"]:
            p = classify.dimension_predict(phi, a["M"], a["tol"], N=a["N"])
            rec["prediction"] = {"value": p.value, "regime": p.regime, "B": p.B, "b": p.b}
        if not a.get("digits") and not a["predict"]:
            rec["exponents"] = asdict(classify.growth_exponents(phi, max(a["N"], 10)))
        out.write(_dump(rec) + "\n")
    elif cmd == "montecarlo":
        r = classify.monte_carlo_law(_phi_from(a["phi"]), a["S"], a["N"], a["seed"], a["law"],
                                     mode=a["sampling"])
        out.write(_dump(asdict(r)) + "\n")
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {cmd!r}")


def dispatch(cfg: RunConfig, out=None) -> int:
    """Run one command; return the exit status."""
    out = out or sys.stdout
    try:
        _run(cfg, out)
    except SpecError as exc:
        print("invalid spec:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 1
    except (UsageError, DomainError, HypothesisError, BudgetExceeded, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, PrecisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return dispatch(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
