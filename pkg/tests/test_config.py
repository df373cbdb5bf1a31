"""Scenario file parsing and defaults."""

import pytest

from hardpax.config import ConfigError, ScenarioConfig, load_config, parse_config
from hardpax.faults import InjectionMode, InjectionPoint


class TestDefaults:
    def test_default_profile(self):
        cfg = ScenarioConfig()
        assert cfg.replicas == 5
        assert cfg.window == 100
        assert cfg.loss_prob == 0.15
        assert cfg.dup_prob == 0.02
        assert (cfg.delay_min_ms, cfg.delay_max_ms) == (1.0, 20.0)
        assert cfg.ops_per_replica == 5000
        assert cfg.batch == 10
        assert cfg.injections == ()

    def test_quorum_is_simple_majority(self):
        assert ScenarioConfig(replicas=3).quorum == 2
        assert ScenarioConfig(replicas=4).quorum == 3
        assert ScenarioConfig(replicas=5).quorum == 3
        assert ScenarioConfig(replicas=7).quorum == 4

    def test_empty_text_yields_defaults(self):
        assert parse_config("") == ScenarioConfig()


class TestParsing:
    def test_full_scenario(self):
        cfg = parse_config(
            "# stress profile\n"
            "replicas=3\n"
            "window=10\n"
            "loss_prob=0.2\n"
            "dup_prob=0.01\n"
            "delay_ms=2-30\n"
            "ops_per_replica=100\n"
            "batch=4\n"
            "seed=42\n"
        )
        assert cfg.replicas == 3
        assert cfg.window == 10
        assert cfg.loss_prob == 0.2
        assert cfg.dup_prob == 0.01
        assert (cfg.delay_min_ms, cfg.delay_max_ms) == (2.0, 30.0)
        assert cfg.ops_per_replica == 100
        assert cfg.batch == 4
        assert cfg.seed == 42

    def test_blank_lines_and_comments_ignored(self):
        cfg = parse_config("\n\n# hi\n  # indented comment\nreplicas=3\n")
        assert cfg.replicas == 3

    def test_inject_timed(self):
        cfg = parse_config(
            "inject point=NET_MSG_RECEIVED mode=timed delay_ms=10000 replicas=0\n"
        )
        (spec,) = cfg.injections
        assert spec.point is InjectionPoint.NET_MSG_RECEIVED
        assert spec.mode is InjectionMode.SINGLE_TIMED
        assert spec.delay_ms == 10000.0
        assert spec.replicas == frozenset({0})

    def test_inject_prob_all_with_action(self):
        cfg = parse_config(
            "inject point=APP_ADD_ELEMENT mode=prob p=0.8 replicas=all action=skip\n"
        )
        (spec,) = cfg.injections
        assert spec.mode is InjectionMode.PROBABILITY
        assert spec.probability == 0.8
        assert spec.replicas is None
        assert spec.action == "skip"

    def test_inject_replica_list(self):
        cfg = parse_config("inject point=STORAGE_LOG_READ mode=timed delay_ms=1 replicas=0,2,4\n")
        assert cfg.injections[0].replicas == frozenset({0, 2, 4})

    def test_multiple_injections_keep_order(self):
        cfg = parse_config(
            "inject point=STORAGE_LOG_READ mode=timed delay_ms=1\n"
            "inject point=CHECKPOINT_READ mode=timed delay_ms=2\n"
        )
        assert [s.point for s in cfg.injections] == [
            InjectionPoint.STORAGE_LOG_READ,
            InjectionPoint.CHECKPOINT_READ,
        ]


class TestErrors:
    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("bogus_key=3\n", "unknown key"),
            ("replicas=two\n", "not an integer"),
            ("replicas=0\n", "must be >= 1"),
            ("loss_prob=1.5\n", "out of range"),
            ("loss_prob=x\n", "not a number"),
            ("delay_ms=20\n", "min-max"),
            ("delay_ms=20-5\n", "below min"),
            ("replicas=3\nreplicas=5\n", "duplicate key"),
            ("replicas = 3\n", "malformed line"),
            ("inject\n", "empty inject"),
            ("inject point=NOPE mode=timed delay_ms=1\n", "unknown inject point"),
            ("inject point=STORAGE_LOG_READ mode=maybe\n", "timed or prob"),
            ("inject point=STORAGE_LOG_READ mode=timed\n", "needs delay_ms"),
            ("inject point=STORAGE_LOG_READ mode=prob\n", "needs p"),
            ("inject point=STORAGE_LOG_READ mode=prob p=2\n", "out of range"),
            ("inject point=STORAGE_LOG_READ mode=timed delay_ms=1 replicas=a,b\n", "bad replicas"),
            ("inject point=STORAGE_LOG_READ mode=timed delay_ms=1 action=explode\n", "mangle or skip"),
            ("inject point=STORAGE_LOG_READ mode=timed delay_ms=1 extra=1\n", "unknown inject keys"),
            ("inject point=STORAGE_LOG_READ mode=timed delay_ms=1 delay_ms=2\n", "duplicate inject key"),
            ("inject point mode=timed\n", "malformed inject token"),
        ],
    )
    def test_rejects_with_line_number(self, text, fragment):
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert fragment in str(err.value)
        assert "line " in str(err.value)

    def test_error_reports_correct_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config("replicas=3\n# fine\nbogus=1\n")
        assert str(err.value).startswith("line 3:")


class TestLoadConfig:
    def test_reads_from_disk(self, tmp_path):
        path = tmp_path / "scenario.txt"
        path.write_text("replicas=3\nseed=7\n", encoding="utf-8")
        cfg = load_config(path)
        assert cfg.replicas == 3 and cfg.seed == 7
