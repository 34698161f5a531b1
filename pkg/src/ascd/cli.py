"""Command-line entry point: ``ascd <command> --config <file> [flags]``.

Commands: ``solve`` (run one solver configuration), ``verify-rate``
(check the convergence-rate guarantee on seed averages), ``speedup``
(wall-time and epochs-to-target per worker count), ``check-matrices``
(recurrence/closed-form/goodness property suite) and ``equivalence``
(cross-engine trajectory agreement).

Exit codes: 0 success, 1 solver or check failure, 2 configuration
errors.
"""

import argparse
import sys

from ascd import harness


def _add_common(sub: argparse.ArgumentParser, config_required: bool) -> None:
    sub.add_argument("--config", required=config_required, help="experiment INI file")
    sub.add_argument("--out", default=None, help="output directory override")
    sub.add_argument("--seeds", default=None, help="comma-separated seed list override")
    sub.add_argument("--workers", default=None, help="comma-separated worker counts override")
    sub.add_argument("--q-throttle", type=int, default=None, help="staleness cap override")
    sub.add_argument("--counter-batch", type=int, default=None, help="ranks per counter touch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ascd",
        description="accelerated shared-memory coordinate descent benchmark harness",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in [
        ("solve", True),
        ("verify-rate", True),
        ("speedup", True),
        ("check-matrices", False),
        ("equivalence", False),
    ]:
        _add_common(subs.add_parser(name), needs_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = harness.load_config(args.config)
            if args.seeds:
                cfg.seeds = harness._int_list(args.seeds)
            if args.workers:
                cfg.workers = harness._int_list(args.workers)
            if args.q_throttle is not None:
                cfg.q_throttle = args.q_throttle
            if args.counter_batch is not None:
                cfg.counter_batch = args.counter_batch
        else:
            cfg = None
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    command = {
        "solve": harness.cmd_solve,
        "verify-rate": harness.cmd_verify_rate,
        "speedup": harness.cmd_speedup,
        "check-matrices": harness.cmd_check_matrices,
        "equivalence": harness.cmd_equivalence,
    }[args.command]
    if args.command in ("solve", "verify-rate", "speedup") and cfg is None:
        print("config error: this command requires --config", file=sys.stderr)
        return 2
    try:
        return command(cfg, args.out)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
