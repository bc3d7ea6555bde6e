"""``rcrcli``: ground, solve exactly, shatter, run RCR, and sweep recovery levels."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .compensation import CompensationParams, Mode, Schedule
from .errors import CapacityError, InconsistentModelError, ParseError
from .evaluation import rows_to_csv, sweep
from .exact import brute_force, factor_graph, ve_marginals
from .generators import MODELS, generate_model
from .grounding import format_ground_model, ground
from .parser import read_mln
from .recovery import RecoveryPolicy, rcr
from .relaxation import clone_all
from .shattering import partition_model

EXIT_PARSE = 2
EXIT_CAPACITY = 3
EXIT_NOT_CONVERGED = 4


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _marginals_json(marginals: dict, head: dict | None = None, tail: dict | None = None) -> str:
    doc = dict(head or {})
    doc["marginals"] = {str(a): p for a, p in marginals.items()}
    doc.update(tail or {})
    return json.dumps(doc, indent=2) + "\n"


def cmd_ground(args) -> int:
    gm = ground(read_mln(args.model))
    if args.dump:
        sys.stdout.write(format_ground_model(gm))
    else:
        print(f"{len(gm.atoms)} ground atoms, {len(gm.formulas)} ground formulas")
    return 0


def cmd_exact(args) -> int:
    gm = ground(read_mln(args.model))
    table = brute_force(gm) if args.engine == "brute" else ve_marginals(factor_graph(gm))
    _write(args.out, _marginals_json(table.marginals, {"log_z": table.log_z}))
    return 0


def cmd_shatter(args) -> int:
    rm = partition_model(clone_all(read_mln(args.model)))
    for e in rm.equivalences:
        print(f"[{e.id}] {e}    n={e.n} n'={e.n_prime}")
    return 0


def _params(args) -> CompensationParams:
    schedule = Schedule.SIMULTANEOUS if args.schedule == "sim" else Schedule.SEQUENTIAL
    return CompensationParams(
        damping=args.damping, tol=args.tol, max_iters=args.max_iters, schedule=schedule
    )


def cmd_rcr(args) -> int:
    mln = read_mln(args.model)
    if args.recover_count is not None:
        policy = RecoveryPolicy(count=args.recover_count, batch=args.batch, seed=args.seed)
    else:
        policy = RecoveryPolicy(fraction=args.recover_frac, batch=args.batch, seed=args.seed)
    res = rcr(mln, policy, _params(args), Mode(args.mode))
    recovered = {
        "fraction": res.recovered_fraction,
        "truncated": res.truncated,
        "equivalences": [str(e) for e in res.recovered],
    }
    _write(args.out, _marginals_json(res.marginals, {"converged": res.converged}, {"recovered": recovered}))
    if args.trace:
        Path(args.trace).write_text(res.trace.to_csv())
    if args.audit:
        Path(args.audit).write_text(res.audit_jsonl())
    if args.strict and not res.converged:
        print("compensation did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return 0


def cmd_eval(args) -> int:
    if args.gen:
        mln = generate_model(args.gen, args.size)
        name = args.gen
    elif args.model:
        mln = read_mln(args.model)
        name = Path(args.model).stem
    else:
        raise SystemExit("eval needs a model file or --gen")
    grid = [float(g) for g in args.grid.split(",")]
    rows = sweep(mln, grid, _params(args), Mode(args.mode), name=name, workers=args.workers)
    _write(args.out, rows_to_csv(rows))
    return 0


def _compensation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["ground", "lifted"], default="lifted")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--schedule", choices=["seq", "sim"], default="seq")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcrcli", description="Lifted relax, compensate and recover for MLNs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="ground a model")
    p.add_argument("model")
    p.add_argument("--dump", action="store_true", help="print every ground formula")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("exact", help="exact marginals")
    p.add_argument("model")
    p.add_argument("--engine", choices=["ve", "brute"], default="ve")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("shatter", help="list the partitioned equivalences")
    p.add_argument("model")
    p.set_defaults(func=cmd_shatter)

    p = sub.add_parser("rcr", help="approximate marginals by relax, compensate, recover")
    p.add_argument("model")
    _compensation_flags(p)
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--recover-frac", type=float, default=0.0)
    budget.add_argument("--recover-count", type=int)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--trace", help="CSV of the final compensation run")
    p.add_argument("--audit", help="JSON lines recovery log")
    p.add_argument("--strict", action="store_true", help="exit 4 if compensation did not converge")
    p.set_defaults(func=cmd_rcr)

    p = sub.add_parser("eval", help="sweep recovery levels against exact marginals")
    p.add_argument("model", nargs="?")
    p.add_argument("--gen", choices=MODELS)
    p.add_argument("--size", type=int, default=2)
    p.add_argument("--grid", default="0,0.25,0.5,0.75,1")
    _compensation_flags(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except CapacityError as err:
        print(f"capacity exceeded: {err}", file=sys.stderr)
        return EXIT_CAPACITY
    except InconsistentModelError as err:
        print(f"inconsistent model: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
