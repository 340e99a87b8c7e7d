"""Command line entry point: ``ghecheck verify ...`` and ``ghecheck simulate ...``."""

from __future__ import annotations

import argparse
import inspect
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .verdict import Verdict

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def registry() -> dict:
    from . import hamiltonian, model, olver, recursion

    reg = {}
    for mod in (model, hamiltonian, recursion, olver):
        reg.update(mod.CHECKS)
    for iname in hamiltonian.printed_integrals():
        for fl in hamiltonian.FLOWS:
            reg["conservation:%s:%s" % (iname, fl)] = (
                lambda i, f: lambda: hamiltonian.conservation_prediction_check(i, f))(iname, fl)
    return reg


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError("not a rational number: %r" % text) from exc


def run_check(name: str, a=None, b=None) -> Verdict:
    fn = registry()[name]
    kw = {}
    try:
        params = inspect.signature(fn).parameters
    except (TypeError, ValueError):
        params = {}
    from .diffalg import DiffExpr
    if a is not None and "a" in params:
        kw["a"] = DiffExpr.const(a)
    if b is not None and "b" in params:
        kw["b"] = DiffExpr.const(b)
    try:
        return fn(**kw)
    except Exception as exc:  # a check that crashes is a failed check
        return Verdict(name, False, "error: %s: %s" % (type(exc).__name__, exc))


def _run_star(args):
    return run_check(*args)


def select(names: list, reg: dict) -> list:
    out = []
    for n in names:
        if n == "all":
            out.extend(reg)
        elif n.endswith("*"):
            hits = [k for k in reg if k.startswith(n[:-1])]
            if not hits:
                raise KeyError(n)
            out.extend(hits)
        elif n in reg:
            out.append(n)
        else:
            raise KeyError(n)
    seen = set()
    return [n for n in out if not (n in seen or seen.add(n))]


def cmd_verify(args) -> int:
    reg = registry()
    if args.list:
        print("\n".join(sorted(reg)))
        return EXIT_OK
    if not args.checks:
        print("no checks named (use 'all' or --list)", file=sys.stderr)
        return EXIT_USAGE
    try:
        names = select(args.checks, reg)
    except KeyError as exc:
        print("unknown check %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    jobs = [(n, args.a, args.b) for n in names]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            verdicts = list(pool.map(_run_star, jobs))
    else:
        verdicts = [_run_star(j) for j in jobs]
    if args.json:
        payload = [v.to_json() for v in verdicts]
        text = json.dumps(payload if len(payload) > 1 else payload[0], indent=2, sort_keys=True, default=str)
        print(text)
    else:
        for v in verdicts:
            print(v.line(), flush=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verdicts.json").write_text(json.dumps([v.to_json() for v in verdicts], indent=2,
                                                      sort_keys=True, default=str))
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_FAIL


def cmd_simulate(args) -> int:
    from . import simulator as sim

    try:
        cfg = sim.GridConfig.from_file(args.config) if args.config else sim.GridConfig().validate()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.b is not None:
            cfg.b = float(args.b)
        cfg.validate()
        report = sim.run_and_monitor(cfg)
    except (sim.ConfigError, OSError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or "sim_out")
    csv_path, json_path = report.write(out)
    summary = report.summary()
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for k, d in summary["max_drift"].items():
            print("%-4s max relative drift %.3e" % (k, d))
        print("min u_yz %.4f, %d steps, %.1f s -> %s, %s" % (report.min_uyz, report.steps, report.seconds,
                                                             csv_path, json_path))
        if report.aborted:
            print("aborted: " + report.aborted)
    return EXIT_FAIL if report.aborted else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghecheck", description="Symbolic checks and simulation for the general heavenly equation.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="random phases of the initial data")
    common.add_argument("--b", type=_rational, help="specialize the flow parameter b")
    common.add_argument("--a", type=_rational, help="specialize the pencil parameter a (default symbolic)")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run named checks")
    v.add_argument("checks", nargs="*", help="check names, prefix* patterns or 'all'")
    v.add_argument("--list", action="store_true", help="list the registry")
    v.add_argument("--jobs", type=int, default=1, help="worker processes")
    v.set_defaults(func=cmd_verify)
    s = sub.add_parser("simulate", parents=[common], help="integrate the flow and monitor integrals")
    s.add_argument("config", nargs="?", help="key = value config file")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
