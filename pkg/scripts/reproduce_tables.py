#!/usr/bin/env python3
"""Reproduce the detection-rate tables for every fault family.

Runs ten seeded experiment suites (one fault-free baseline plus nine
injection suites covering network, storage, checkpoint, application,
and protocol faults), prints the aggregate table, and writes:

    <out>/table.tsv          one row per suite
    <out>/runs_<suite>.tsv   per-run outcomes for each suite

Default suite sizes and base seeds match the acceptance tests, so the
default invocation reproduces those tables run for run. Use --runs to
resize every suite uniformly, or --quick for a fast smoke pass.

    python scripts/reproduce_tables.py --out results
    python scripts/reproduce_tables.py --quick
"""

import argparse
import os
import sys
import time

from hardpax import (
    InjectionMode,
    InjectionPoint,
    InjectionSpec,
    ScenarioConfig,
    format_table,
    run_experiment,
    write_runs,
    write_table,
)

FULL = ScenarioConfig()
SHORT = ScenarioConfig(ops_per_replica=1000)
ONE = frozenset({1})


def timed(point, delay_ms, replicas, action="mangle"):
    return InjectionSpec(
        point=point,
        mode=InjectionMode.SINGLE_TIMED,
        delay_ms=delay_ms,
        replicas=replicas,
        action=action,
    )


def prob(point, p, replicas=None):
    return InjectionSpec(
        point=point, mode=InjectionMode.PROBABILITY, probability=p, replicas=replicas
    )


# (name, config, default runs, base seed)
SUITES = [
    (
        "fault-free",
        FULL,
        100,
        0,
    ),
    (
        "net-corruption",
        SHORT.with_injections(timed(InjectionPoint.NET_MSG_RECEIVED, 500.0, ONE)),
        50,
        200,
    ),
    (
        "log-corruption",
        SHORT.with_injections(timed(InjectionPoint.STORAGE_LOG_READ, 500.0, ONE)),
        25,
        300,
    ),
    (
        "checkpoint-corruption",
        ScenarioConfig(ops_per_replica=1000, checkpoint_interval=500).with_injections(
            timed(InjectionPoint.CHECKPOINT_READ, 0.0, ONE)
        ),
        25,
        325,
    ),
    (
        "app-mangle",
        SHORT.with_injections(
            timed(InjectionPoint.APP_ADD_ELEMENT, 300.0, frozenset({2}))
        ),
        25,
        400,
    ),
    (
        "app-skip",
        SHORT.with_injections(
            timed(InjectionPoint.APP_ADD_ELEMENT, 300.0, frozenset({2}), action="skip")
        ),
        25,
        425,
    ),
    (
        "learner-one",
        SHORT.with_injections(prob(InjectionPoint.LEARNER_COMMIT_QUORUM, 0.8, ONE)),
        50,
        500,
    ),
    (
        "learner-all",
        SHORT.with_injections(prob(InjectionPoint.LEARNER_COMMIT_QUORUM, 0.8)),
        50,
        600,
    ),
    (
        "acceptor-all",
        SHORT.with_injections(prob(InjectionPoint.ACCEPTOR_PROMISE_HISTORY, 0.8)),
        50,
        700,
    ),
    (
        "coordinator-all",
        SHORT.with_injections(prob(InjectionPoint.COORDINATOR_PROMISE_VALUES, 0.8)),
        50,
        800,
    ),
]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--runs", type=int, default=None, help="override the run count of every suite"
    )
    parser.add_argument(
        "--quick", action="store_true", help="5 runs per suite (smoke pass)"
    )
    parser.add_argument("--seed", type=int, default=0, help="offset added to base seeds")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument(
        "--suite",
        action="append",
        choices=[name for name, _, _, _ in SUITES],
        help="run only the named suite (repeatable)",
    )
    args = parser.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    rows = []
    total_start = time.monotonic()
    for name, cfg, default_runs, base_seed in SUITES:
        if args.suite and name not in args.suite:
            continue
        runs = args.runs if args.runs is not None else default_runs
        if args.quick:
            runs = min(runs, 5)
        start = time.monotonic()
        row, results = run_experiment(name, cfg, runs, base_seed + args.seed)
        elapsed = time.monotonic() - start
        rows.append(row)
        write_runs(os.path.join(args.out, "runs_%s.tsv" % name), results)
        print(
            "%-22s %3d runs  %6.1fs" % (name, runs, elapsed),
            file=sys.stderr,
        )

    write_table(os.path.join(args.out, "table.tsv"), rows)
    sys.stdout.write(format_table(rows))
    print(
        "total %.1fs, outputs in %s/" % (time.monotonic() - total_start, args.out),
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
