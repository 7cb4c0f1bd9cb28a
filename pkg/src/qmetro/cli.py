"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 numerical-invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional

import numpy as np

from . import radar
from .errors import InputError, QMetroError
from .fisher import pure_bundle
from .measurement import optimal_measurement, verify_saturation
from .states import custom_state, qubit_fixture, qutrit_fixture, squeezed_fixture
from .tradeoff import report

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
EXAMPLES = ("qubit", "qutrit", "squeezed", "radar-sep", "radar-ent")
SWEEP_VARS = ("kappa", "theta", "x3")
SWEEP_COLUMNS = ("variable", "value", "n", "tight_bound", "achieved", "gap", "gill_massar",
                 "matsumoto_lower", "chen_bound", "chen_bound_tightened")
FLOAT = "%.17g"

DEFAULT_PARAMS = {
    "qubit": [0.0, np.pi / 4],
    "qutrit": [0.0, np.pi / 4],
    "squeezed": [0.0, 0.0, 0.0],
}
STATE_SCHEMA = ('{"type": "qubit"|"qutrit"|"squeezed", "params": [...]} or '
                '{"type": "custom_matrix", "psi": [[re, im], ...], "dpsi": [[[re, im], ...], ...]}')


class UsageError(InputError):
    pass


def _complex_array(obj, what):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{what} must be nested lists of [re, im] pairs") from exc
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise UsageError(f"{what} must be nested lists of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def fixture(name: str, params):
    makers = {"qubit": (qubit_fixture, 2), "qutrit": (qutrit_fixture, 2), "squeezed": (squeezed_fixture, 3)}
    if name not in makers:
        raise UsageError(f"unknown state type {name!r}; schema: {STATE_SCHEMA}")
    make, n = makers[name]
    params = DEFAULT_PARAMS[name] if params is None else list(params)
    if len(params) != n:
        raise UsageError(f"{name} takes {n} parameters, got {len(params)}")
    return make(*[float(p) for p in params])


def state_from_descriptor(desc: dict):
    if not isinstance(desc, dict) or "type" not in desc:
        raise UsageError(f"state descriptor must be an object; schema: {STATE_SCHEMA}")
    kind = desc["type"]
    if kind == "custom_matrix":
        if "psi" not in desc or "dpsi" not in desc:
            raise UsageError("custom_matrix needs 'psi' and 'dpsi'")
        psi = _complex_array(desc["psi"], "psi")
        dpsi = _complex_array(desc["dpsi"], "dpsi")
        if psi.ndim != 1 or dpsi.ndim != 2:
            raise UsageError("psi must be a vector and dpsi a list of vectors")
        return custom_state(psi, dpsi)
    return fixture(kind, desc.get("params"))


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _radar_signal(name, kappa, sigma=1.0):
    if name == "radar-sep":
        if kappa not in (None, 0.0):
            raise UsageError("radar-sep is the single-photon model; drop --kappa")
        return radar.signal(sigma, 0.0, radar.SINGLE)
    return radar.signal(sigma, 0.6 if kappa is None else kappa, radar.BIPHOTON)


def _state_report(state, varphi, construct=True, ancilla="auto"):
    if not construct:
        return report(pure_bundle(state)).to_dict()
    opt = optimal_measurement(state, ancilla=ancilla, varphi=varphi)
    rep = verify_saturation(opt)
    out = rep.to_dict()
    out["measurement"] = opt.measurement.to_dict()
    return out


def run_example(name: str, params=None, kappa=None, varphi=0.0, construct=True) -> dict:
    if name not in EXAMPLES:
        raise UsageError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    if name.startswith("radar"):
        if params:
            raise UsageError("radar examples take --kappa, not --params")
        sig = _radar_signal(name, kappa)
        if not construct:
            out = report(radar.radar_fisher(sig)).to_dict()
        else:
            opt = radar.optimal_radar_measurement(sig, varphi)
            rep = verify_saturation(opt)
            out = rep.to_dict()
            out["measurement"] = opt.measurement.to_dict()
            out["product"] = radar.product_from_cfim(rep.F_C)
        out["refined_bound"] = radar.refined_ak_bound(sig.kappa)
        out["kappa"] = sig.kappa
    else:
        if kappa is not None:
            raise UsageError("--kappa applies to radar examples only")
        out = _state_report(fixture(name, params), varphi, construct)
    out["example"] = name
    return out


def run_bound(desc: dict, varphi=0.0, construct=False) -> dict:
    return _state_report(state_from_descriptor(desc), varphi, construct)


def parse_sweep(spec: str):
    parts = spec.split(":")
    if len(parts) != 4:
        raise UsageError("--sweep expects VAR:LO:HI:STEPS")
    var, lo, hi, steps = parts
    if var not in SWEEP_VARS:
        raise UsageError(f"sweep variable must be one of {', '.join(SWEEP_VARS)}")
    try:
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise UsageError("LO and HI must be numbers and STEPS an integer") from exc
    if steps < 1:
        raise UsageError("empty sweep range")
    if steps == 1 and lo != hi:
        raise UsageError("a single-step sweep needs LO == HI")
    return var, np.linspace(lo, hi, steps)


def run_sweep(var: str, grid, varphi=0.0):
    rows = []
    for value in grid:
        if var == "kappa":
            if not 0.0 <= value < 1.0:
                raise UsageError("kappa must lie in [0, 1)")
            opt = radar.optimal_radar_measurement(radar.signal(1.0, float(value), radar.BIPHOTON), varphi)
        elif var == "theta":
            opt = optimal_measurement(qutrit_fixture(0.0, float(value)), varphi=varphi)
        else:
            opt = optimal_measurement(squeezed_fixture(0.0, 0.0, float(value)), varphi=varphi)
        rep = verify_saturation(opt)
        rows.append([var, value, rep.n, rep.tight_bound, rep.achieved, rep.gap, rep.gill_massar,
                     rep.matsumoto_lower, rep.chen_bound, rep.chen_bound_tightened])
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT % v
    return str(v)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


REPORT_CSV = ("n", "tight_bound", "achieved", "gap", "gill_massar", "matsumoto_lower",
              "chen_bound", "chen_bound_tightened", "mixed")


def report_to_csv(d: dict) -> str:
    return rows_to_csv(REPORT_CSV, [[d.get(k) for k in REPORT_CSV]])


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--varphi", type=float, default=0.0, help="free angle of degenerate blocks (radians)")

    p = _Parser(prog="qmetro", description="Tight multi-parameter tradeoff bounds and optimal measurements.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("example", parents=[common], help="run a built-in fixture")
    ex.add_argument("--example", required=True, choices=EXAMPLES)
    ex.add_argument("--params", type=float, nargs="+", help="fixture parameters (radians)")
    ex.add_argument("--kappa", type=float)
    ex.add_argument("--construct", type=_bool, default=True)

    bd = sub.add_parser("bound", parents=[common], help="bound for a state descriptor")
    bd.add_argument("--input", required=True)
    bd.add_argument("--construct", type=_bool, default=False)

    ms = sub.add_parser("measure", parents=[common], help="optimal measurement basis")
    src = ms.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--example", choices=EXAMPLES)
    ms.add_argument("--params", type=float, nargs="+")
    ms.add_argument("--kappa", type=float)

    rs = sub.add_parser("radar-sim", parents=[common], help="Monte Carlo range/velocity estimation")
    rs.add_argument("--example", choices=("radar-sep", "radar-ent"), default="radar-ent")
    rs.add_argument("--kappa", type=float)
    rs.add_argument("--shots", type=int, default=100_000)
    rs.add_argument("--batches", type=int, default=200)
    rs.add_argument("--seed", type=int, default=0)
    rs.add_argument("--offset", type=float, nargs=2, default=(0.0, 0.0),
                    metavar=("DT", "DOMEGA"), help="true minus reference (t_bar, omega_bar)")

    sw = sub.add_parser("sweep", parents=[common], help="bound and achieved value over a grid")
    sw.add_argument("--sweep", required=True, metavar="VAR:LO:HI:STEPS")
    return p


def execute(args) -> str:
    fmt = args.format
    if args.command == "example":
        d = run_example(args.example, args.params, args.kappa, args.varphi, args.construct)
        return json.dumps(d, indent=2) + "\n" if fmt == "json" else report_to_csv(d)
    if args.command == "bound":
        d = run_bound(_load_json(args.input), args.varphi, args.construct)
        return json.dumps(d, indent=2) + "\n" if fmt == "json" else report_to_csv(d)
    if args.command == "measure":
        if args.input:
            d = run_bound(_load_json(args.input), args.varphi, construct=True)
        else:
            d = run_example(args.example, args.params, args.kappa, args.varphi, construct=True)
        m = d["measurement"]
        if fmt == "json":
            return json.dumps(m, indent=2) + "\n"
        rows = [[i, k, FLOAT % re, FLOAT % im] for i, vec in enumerate(m["basis"]) for k, (re, im) in enumerate(vec)]
        return rows_to_csv(("outcome", "component", "re", "im"), rows)
    if args.command == "radar-sim":
        sig = _radar_signal(args.example, args.kappa)
        run = radar.simulate(sig, shots=args.shots, seed=args.seed, batches=args.batches,
                             reference_offset=args.offset)
        return json.dumps(run.summary(), indent=2) + "\n" if fmt == "json" else run.to_csv()
    if args.command == "sweep":
        var, grid = parse_sweep(args.sweep)
        rows = run_sweep(var, grid, args.varphi)
        if fmt == "csv":
            return rows_to_csv(SWEEP_COLUMNS, rows)
        return json.dumps({"schema": "1", "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows]},
                          indent=2, default=float) + "\n"
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = execute(args)
    except InputError as exc:
        print(f"qmetro: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QMetroError as exc:
        print(f"qmetro: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"qmetro: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
