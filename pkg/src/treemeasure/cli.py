"""Command-line front end.

Machine output (JSON, or SMT-LIB text for ``export`` without ``--out``) goes
to stdout, human diagnostics to stderr. Exit codes: 0 success, 1 input or
domain error, 2 I/O error, 3 non-convergence (or an inconclusive solver).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import fo_export
from .automaton import ParseError, load, validate
from .finite_lattice import check_equivalence, check_size
from .powerdomain import (InvariantViolation, NonConvergence, SupportLimit,
                          measure_of_language, order_selftest)

log = logging.getLogger("treemeasure")

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_NONCONV = 0, 1, 2, 3
LATTICE_CONFIGS = ((1, 2), (2, 2), (1, 4), (2, 4))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for I/O errors here
    def error(self, message):
        raise UsageError(message)


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text}") from None


def build_parser() -> argparse.ArgumentParser:
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--tol", type=_positive_float, default=1e-9,
                     help="total-variation stabilization threshold (default 1e-9)")
    run.add_argument("--max-iter", type=_positive_int, default=10**6,
                     help="iteration cap per limit (default 1e6)")
    run.add_argument("--max-support", type=_positive_int, default=65536,
                     help="largest allowed distribution support (default 65536)")
    run.add_argument("--strict-invariants", action="store_true",
                     help="check structural invariants and fail on any violation")
    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", help="write the result to this file instead of stdout")

    p = _Parser(prog="treemeasure",
                description="Measure of the language of a parity tree automaton.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check an automaton file")
    v.add_argument("path")

    m = sub.add_parser("measure", parents=[run, out], help="compute the measure")
    m.add_argument("path")

    c = sub.add_parser("compare", parents=[run, out], help="compare the measure with q")
    c.add_argument("path")
    c.add_argument("q", nargs="?", type=_fraction)
    c.add_argument("--q", dest="q_flag", type=_fraction)
    c.add_argument("--band", type=float, default=1e-6,
                   help="EQUAL when |measure - q| <= band (default 1e-6)")

    e = sub.add_parser("export", parents=[run, out], help="write the SMT-LIB script")
    e.add_argument("path")
    e.add_argument("--q", type=_fraction, help="add an assertion comparing measure with q")
    e.add_argument("--relation", default=">", choices=fo_export.RELATIONS)
    e.add_argument("--solver", help="SMT solver executable for the consistency check")
    e.add_argument("--solver-timeout", type=_positive_float, default=600.0)

    s = sub.add_parser("selftest", parents=[out], help="oracle self-tests")
    s.add_argument("kind", choices=("lattice", "order"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=_positive_int, default=None,
                   help="lattice: per (g,d) configuration (default 50); order: pairs (default 200)")
    s.add_argument("--g", type=_positive_int)
    s.add_argument("--d", type=_positive_int)
    s.add_argument("--replay-dir", default=".",
                   help="where tables of failing lattice trials are written")
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_valid(path: str):
    aut = load(path)
    diags = validate(aut)
    for dgn in diags:
        print(f"{path}: {dgn}", file=sys.stderr)
    if any(dgn.severity == "error" for dgn in diags):
        raise ParseError("automaton is not valid")
    return aut


def _measure(args, aut):
    return measure_of_language(aut, tol=args.tol, cap=args.max_iter,
                               check_invariants=args.strict_invariants,
                               strict=args.strict_invariants,
                               max_support=args.max_support)


def cmd_validate(args) -> int:
    aut = load(args.path)
    diags = validate(aut)
    for dgn in diags:
        print(f"{args.path}: {dgn}", file=sys.stderr)
    ok = not any(dgn.severity == "error" for dgn in diags)
    sys.stdout.write(_json({"valid": ok, "states": aut.n_states, "d": aut.d,
                            "diagnostics": [str(dgn) for dgn in diags]}))
    return EXIT_OK if ok else EXIT_INPUT


def cmd_measure(args) -> int:
    report = _measure(args, _load_valid(args.path))
    _emit(report.to_json() + "\n", args.out)
    return EXIT_OK


def verdict(m: float, q: Fraction, band: float) -> str:
    if abs(m - float(q)) <= band:
        return "EQUAL"
    return "LESS" if m < q else "GREATER"


def cmd_compare(args) -> int:
    q = args.q if args.q is not None else args.q_flag
    if q is None:
        raise UsageError("compare needs a value q")
    if not 0 <= q <= 1:
        raise UsageError(f"q must lie in [0, 1], got {q}")
    if args.band < 0:
        raise UsageError("--band must be >= 0")
    report = _measure(args, _load_valid(args.path))
    result = {"verdict": verdict(report.measure, q, args.band),
              "approximate": True, "measure": report.measure,
              "q": str(q), "band": args.band, "tol": args.tol}
    _emit(_json(result), args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    aut = _load_valid(args.path)
    if args.q is not None:
        script = fo_export.export_compare(aut, args.q, args.relation)
    else:
        script = fo_export.export_measure(aut)
    fo_export.validate_script(script)
    stats = fo_export.formula_stats(script)
    summary = {"variables": stats.variables, "alternation_depth": stats.alternation_depth,
               "bytes": stats.size}
    code = EXIT_OK
    if args.solver:
        summary["solver"], code = _solver_check(args, aut, script)
    if args.out:
        Path(args.out).write_text(script, encoding="utf-8")
        summary["out"] = args.out
        sys.stdout.write(_json(summary))
    else:
        sys.stdout.write(script)
        print(_json(summary), file=sys.stderr, end="")
    return code


def _solver_check(args, aut, script) -> tuple[dict, int]:
    if args.q is not None:
        answer = fo_export.run_solver(args.solver, script, args.solver_timeout)
        return {"query": f"measure {args.relation} {args.q}", "answer": answer}, (
            EXIT_NONCONV if answer == "unknown" else EXIT_OK)
    m = _measure(args, aut).measure
    eps = Fraction(1, 10**6)
    probe = fo_export.export_distance(aut, Fraction(m), eps)
    answer = fo_export.run_solver(args.solver, probe, args.solver_timeout)
    consistent = {"unsat": True, "sat": False}.get(answer)
    info = {"query": f"|measure - {m!r}| > {eps}", "answer": answer,
            "consistent": consistent}
    if consistent is None:
        return info, EXIT_NONCONV
    return info, EXIT_OK if consistent else EXIT_INPUT


def cmd_selftest(args) -> int:
    if args.kind == "order":
        rep = order_selftest(args.seed, args.trials or 200)
        for line in rep.disagreements:
            print(line, file=sys.stderr)
        _emit(_json({"kind": "order", "seed": args.seed, "trials": rep.trials,
                     "checks": rep.agree + len(rep.disagreements),
                     "disagreements": len(rep.disagreements), "ok": rep.ok}), args.out)
        return EXIT_OK if rep.ok else EXIT_INPUT

    if (args.g is None) != (args.d is None):
        raise UsageError("give both --g and --d, or neither")
    configs = [(args.g, args.d)] if args.g is not None else list(LATTICE_CONFIGS)
    for g, d in configs:
        try:
            check_size(g, d)
        except ValueError as err:
            raise UsageError(str(err)) from None
    trials = args.trials or 50
    rows, ok = [], True
    for g, d in configs:
        rep = check_equivalence(g, d, args.seed, trials)
        for mm in rep.mismatches:
            replay = Path(args.replay_dir) / (f"replay-g{g}-d{d}-seed{args.seed}-trial{mm.trial}.txt")
            replay.write_text(mm.table, encoding="utf-8")
            print(f"mismatch g={g} d={d} trial {mm.trial}: phi={mm.phi} "
                  f"nested={mm.nested}; table written to {replay}", file=sys.stderr)
        for v in rep.violations[:20]:
            print(f"g={g} d={d} {v}", file=sys.stderr)
        ok &= rep.ok
        rows.append({"g": g, "d": d, "trials": rep.trials, "mismatches": len(rep.mismatches),
                     "violations": len(rep.violations)})
    _emit(_json({"kind": "lattice", "seed": args.seed, "configs": rows,
                 "trials": sum(r["trials"] for r in rows), "ok": ok}), args.out)
    return EXIT_OK if ok else EXIT_INPUT


COMMANDS = {"validate": cmd_validate, "measure": cmd_measure, "compare": cmd_compare,
            "export": cmd_export, "selftest": cmd_selftest}


def _setup_logging() -> None:
    level = os.environ.get("TREEMEASURE_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"treemeasure: usage error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergence as err:
        print(f"treemeasure: {err}", file=sys.stderr)
        sys.stdout.write(err.report.to_json() + "\n")
        return EXIT_NONCONV
    except InvariantViolation as err:
        for msg in err.messages:
            print(f"treemeasure: invariant: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except (ParseError, SupportLimit, fo_export.ExportError) as err:
        print(f"treemeasure: {err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"treemeasure: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
