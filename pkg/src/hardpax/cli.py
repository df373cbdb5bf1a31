"""Command line front end.

    hardpax run --scenario FILE [--runs N] [--seed S] [--out DIR] [--trace]
    hardpax replay --scenario FILE --seed S [--trace-file PATH]

`run` executes a batch of simulations of one scenario and prints the
summary table; with --out it also writes table.tsv, runs.tsv, and, with
--trace, one trace_<i>.log per run. `replay` executes a single seeded
run with tracing on and streams the event log, which is byte-identical
across repeats of the same scenario and seed.
"""

import argparse
import os
import sys

from .config import load_config
from .harness import (
    ensure_dir,
    format_table,
    run_experiment,
    run_scenario,
    write_runs,
    write_table,
    write_trace,
)
from .sim import format_trace


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hardpax",
        description="Fault-injection experiments on a hardened replicated state machine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a batch of simulations")
    p_run.add_argument("--scenario", required=True, help="scenario file")
    p_run.add_argument("--runs", type=int, default=10, help="number of runs")
    p_run.add_argument("--seed", type=int, default=0, help="seed of the first run")
    p_run.add_argument("--out", help="directory for table.tsv and runs.tsv")
    p_run.add_argument("--trace", action="store_true", help="write per-run traces")

    p_replay = sub.add_parser("replay", help="trace a single run")
    p_replay.add_argument("--scenario", required=True, help="scenario file")
    p_replay.add_argument("--seed", type=int, required=True, help="run seed")
    p_replay.add_argument("--trace-file", help="write the trace here instead of stdout")

    args = parser.parse_args(argv)
    cfg = load_config(args.scenario)
    name = os.path.splitext(os.path.basename(args.scenario))[0]

    if args.command == "run":
        row, results = run_experiment(
            name, cfg, args.runs, base_seed=args.seed, trace=args.trace
        )
        sys.stdout.write(format_table([row]))
        if args.out:
            ensure_dir(args.out)
            write_table(os.path.join(args.out, "table.tsv"), [row])
            write_runs(os.path.join(args.out, "runs.tsv"), results)
            if args.trace:
                for r in results:
                    write_trace(os.path.join(args.out, "trace_%d.log" % r.run_index), r)
        return 0

    result = run_scenario(cfg, args.seed, trace=True)
    if args.trace_file:
        write_trace(args.trace_file, result)
    else:
        for entry in result.trace or ():
            sys.stdout.write(format_trace(entry) + "\n")
    sys.stdout.write(
        "# outcome=%s detections=%d sim_ms=%.3f\n"
        % (result.outcome.value, len(result.detections), result.sim_time_ms)
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
