"""Run classification, experiment batching, and TSV outputs."""

import hardpax.harness as harness
from hardpax.config import ScenarioConfig
from hardpax.hardening import DetectionKind, DetectionRecord
from hardpax.harness import (
    RUNS_HEADER,
    TABLE_HEADER,
    RunOutcome,
    RunResult,
    classify_run,
    experiment_row,
    format_table,
    run_experiment,
    run_scenario,
    write_runs,
    write_table,
    write_trace,
)


class StubSim:
    def __init__(self, timed_out=False, detections=()):
        self.timed_out = timed_out
        self.detections = list(detections)


DETECT = DetectionRecord(DetectionKind.INTEGRITY, 0, 5, "example")


def result(outcome, detections=(), aborted=None, injections=0, trace=None):
    return RunResult(
        run_index=0, seed=0, outcome=outcome, injections=injections,
        detections=list(detections), aborted=aborted or {}, digests={},
        applied={}, sim_time_ms=123.456, sends_after_abort=0,
        window_log=[], trace=trace,
    )


class TestClassifyRun:
    def test_clean_run_is_ok(self):
        assert classify_run(StubSim(), {0: 1, 1: 1, 2: 1}) is RunOutcome.OK

    def test_detections_with_agreeing_survivors_is_detected(self):
        sim = StubSim(detections=[DETECT])
        assert classify_run(sim, {0: 1, 1: 1}) is RunOutcome.DETECTED

    def test_disagreeing_survivors_are_an_error_even_when_detected(self):
        sim = StubSim(detections=[DETECT])
        assert classify_run(sim, {0: 1, 1: 2}) is RunOutcome.ERROR

    def test_single_survivor_cannot_disagree(self):
        sim = StubSim(detections=[DETECT])
        assert classify_run(sim, {3: 7}) is RunOutcome.DETECTED

    def test_timeout_wins_over_everything(self):
        sim = StubSim(timed_out=True, detections=[DETECT])
        assert classify_run(sim, {0: 1, 1: 2}) is RunOutcome.TIMEOUT


class TestExperimentRow:
    def test_counts_and_rate(self):
        row = experiment_row("x", [
            result(RunOutcome.OK),
            result(RunOutcome.DETECTED, detections=[DETECT, DETECT], injections=2),
            result(RunOutcome.ERROR, detections=[DETECT], injections=1),
            result(RunOutcome.ERROR, injections=3),
        ])
        assert row.runs == 4
        assert row.injections == 6
        # the detections column counts runs with at least one detection
        assert row.detections == 2
        assert row.errors == 2
        assert row.rate == (4 - 2) / 4

    def test_rate_of_empty_batch_defaults_to_one(self):
        assert experiment_row("x", []).rate == 1.0


class TestBatching:
    def test_seeds_are_base_plus_index_and_reproducible(self):
        cfg = ScenarioConfig(replicas=3, ops_per_replica=30, batch=5)
        row_a, results_a = run_experiment("t", cfg, runs=3, base_seed=100)
        row_b, results_b = run_experiment("t", cfg, runs=3, base_seed=100)
        assert [r.seed for r in results_a] == [100, 101, 102]
        assert row_a == row_b
        assert [r.digests for r in results_a] == [r.digests for r in results_b]
        assert all(r.outcome is RunOutcome.OK for r in results_a)

    def test_a_crashing_run_does_not_halt_the_batch(self, monkeypatch):
        calls = []

        def boom(cfg, seed, run_index=0, trace=False, tamper=None):
            calls.append(seed)
            if seed == 1:
                raise RuntimeError("kaput")
            return result(RunOutcome.OK)

        monkeypatch.setattr(harness, "run_scenario", boom)
        row, results = run_experiment("t", ScenarioConfig(), runs=3, base_seed=0)
        assert calls == [0, 1, 2]
        assert results[1].outcome is RunOutcome.TIMEOUT
        assert results[1].crashed == "RuntimeError: kaput"
        assert results[0].crashed is None


class TestTsvOutputs:
    def test_table_format_is_stable(self):
        row = harness.ExperimentRow(
            test="storage", runs=50, injections=50, detections=50,
            errors=0, rate=1.0,
        )
        assert format_table([row]) == (
            "test\truns\tinjections\tdetections\terrors\trate\n"
            "storage\t50\t50\t50\t0\t1.0000\n"
        )

    def test_write_table_and_runs(self, tmp_path):
        row = harness.ExperimentRow("t", 1, 0, 0, 0, 1.0)
        table_path = tmp_path / "table.tsv"
        write_table(str(table_path), [row])
        lines = table_path.read_text().splitlines()
        assert lines[0].split("\t") == list(TABLE_HEADER)

        runs_path = tmp_path / "runs.tsv"
        aborted = {1: DETECT, 0: DETECT}
        write_runs(str(runs_path), [
            result(RunOutcome.OK),
            result(RunOutcome.DETECTED, detections=[DETECT], aborted=aborted),
        ])
        lines = runs_path.read_text().splitlines()
        assert lines[0].split("\t") == list(RUNS_HEADER)
        assert lines[1].split("\t") == ["0", "0", "OK", "0", "0", "-", "123.456"]
        assert lines[2].split("\t") == [
            "0", "0", "DETECTED", "0", "1", "0:INTEGRITY,1:INTEGRITY", "123.456",
        ]

    def test_write_trace(self, tmp_path):
        cfg = ScenarioConfig(replicas=3, ops_per_replica=5, batch=5)
        res = run_scenario(cfg, seed=4, trace=True)
        path = tmp_path / "trace.txt"
        write_trace(str(path), res)
        lines = path.read_text().splitlines()
        assert len(lines) == len(res.trace)
        first = lines[0].split(" ", 4)
        float(first[0])  # time
        int(first[1])    # order
        int(first[2])    # replica
        assert first[3] in {"ARRIVE", "SEND", "DELIVER", "TIMER", "COMMIT"}
