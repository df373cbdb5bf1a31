"""Experiment driver: run batches of simulations and tabulate outcomes.

A run is classified from what an operator could observe at its end:

* TIMEOUT: the watchdog fired; the run never reached quiescence.
* ERROR: two or more replicas are still running with unequal final
  application digests, so corrupt state escaped detection.
* DETECTED: at least one fault was detected (dropped message, aborted
  replica); surviving state is consistent.
* OK: nothing detected, all survivors agree.

The detection rate of an experiment is (runs - errors) / runs: a run
counts against the protocol only when corruption slipped through.
"""

import os
from dataclasses import dataclass
from enum import Enum

from .config import ScenarioConfig
from .hardening import DetectionRecord
from .sim import Simulation, format_trace


class RunOutcome(Enum):
    OK = "OK"
    DETECTED = "DETECTED"
    ERROR = "ERROR"
    TIMEOUT = "TIMEOUT"


@dataclass
class RunResult:
    run_index: int
    seed: int
    outcome: RunOutcome
    injections: int
    detections: list[DetectionRecord]
    aborted: dict[int, DetectionRecord]
    digests: dict[int, int]
    applied: dict[int, int]
    sim_time_ms: float
    sends_after_abort: int
    window_log: list[tuple[int, int, int]]
    trace: list | None = None
    crashed: str | None = None


@dataclass(frozen=True)
class ExperimentRow:
    test: str
    runs: int
    injections: int
    detections: int
    errors: int
    rate: float


def classify_run(sim: Simulation, digests: dict[int, int]) -> RunOutcome:
    if sim.timed_out:
        return RunOutcome.TIMEOUT
    if len(digests) >= 2 and len(set(digests.values())) > 1:
        return RunOutcome.ERROR
    if sim.detections:
        return RunOutcome.DETECTED
    return RunOutcome.OK


def run_scenario(
    cfg: ScenarioConfig,
    seed: int,
    run_index: int = 0,
    trace: bool = False,
    tamper: dict | None = None,
) -> RunResult:
    sim = Simulation(cfg, seed, trace=trace, tamper=tamper)
    sim.run()
    digests = {r.rid: r.app.digest() for r in sim.replicas if r.alive}
    applied = {r.rid: r.transitions.peek() for r in sim.replicas if r.alive}
    aborted = {
        r.rid: r.abort_record for r in sim.replicas if r.abort_record is not None
    }
    return RunResult(
        run_index=run_index,
        seed=seed,
        outcome=classify_run(sim, digests),
        injections=sim.registry.counters.total,
        detections=sim.detections,
        aborted=aborted,
        digests=digests,
        applied=applied,
        sim_time_ms=sim.now,
        sends_after_abort=sim.sends_after_abort,
        window_log=sim.window_log,
        trace=sim.trace,
    )


def run_experiment(
    test: str,
    cfg: ScenarioConfig,
    runs: int,
    base_seed: int = 0,
    trace: bool = False,
    tamper: dict | None = None,
) -> tuple[ExperimentRow, list[RunResult]]:
    """Run `runs` simulations seeded base_seed + i; never halt the batch."""
    results: list[RunResult] = []
    for i in range(runs):
        seed = base_seed + i
        try:
            results.append(
                run_scenario(cfg, seed, run_index=i, trace=trace, tamper=tamper)
            )
        except Exception as e:  # surface as a failed run, keep the batch going
            results.append(RunResult(
                run_index=i, seed=seed, outcome=RunOutcome.TIMEOUT,
                injections=0, detections=[], aborted={}, digests={},
                applied={}, sim_time_ms=0.0, sends_after_abort=0,
                window_log=[], crashed="%s: %s" % (type(e).__name__, e),
            ))
    return experiment_row(test, results), results


def experiment_row(test: str, results: list[RunResult]) -> ExperimentRow:
    runs = len(results)
    errors = sum(1 for r in results if r.outcome is RunOutcome.ERROR)
    return ExperimentRow(
        test=test,
        runs=runs,
        injections=sum(r.injections for r in results),
        detections=sum(1 for r in results if r.detections),
        errors=errors,
        rate=(runs - errors) / runs if runs else 1.0,
    )


TABLE_HEADER = ("test", "runs", "injections", "detections", "errors", "rate")


def format_table(rows: list[ExperimentRow]) -> str:
    lines = ["\t".join(TABLE_HEADER)]
    for r in rows:
        lines.append(
            "%s\t%d\t%d\t%d\t%d\t%.4f"
            % (r.test, r.runs, r.injections, r.detections, r.errors, r.rate)
        )
    return "\n".join(lines) + "\n"


def write_table(path: str, rows: list[ExperimentRow]) -> None:
    with open(path, "w") as f:
        f.write(format_table(rows))


RUNS_HEADER = (
    "run", "seed", "outcome", "injections", "detections", "aborted", "sim_ms"
)


def write_runs(path: str, results: list[RunResult]) -> None:
    with open(path, "w") as f:
        f.write("\t".join(RUNS_HEADER) + "\n")
        for r in results:
            aborted = ",".join(
                "%d:%s" % (rid, rec.kind.name) for rid, rec in sorted(r.aborted.items())
            )
            f.write("%d\t%d\t%s\t%d\t%d\t%s\t%.3f\n" % (
                r.run_index, r.seed, r.outcome.value, r.injections,
                len(r.detections), aborted or "-", r.sim_time_ms,
            ))


def write_trace(path: str, result: RunResult) -> None:
    with open(path, "w") as f:
        for entry in result.trace or ():
            f.write(format_trace(entry) + "\n")


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
