"""Hardened replicated state machine with fault-injection experiments.

A Multi-Paxos variant in which acceptors broadcast their votes to every
replica, hardened against non-malicious arbitrary faults: all data
crossing a process boundary is checksummed, loop-bearing counters are
mirrored, application transitions are semantically checked, and
replicas cross-validate windowed state checksums carried on votes. A
deterministic discrete-event simulator injects faults at chosen points
and the harness measures how often corruption is detected before it
spreads.
"""

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .faults import InjectionMode, InjectionPoint, InjectionSpec
from .hardening import (
    DetectionKind,
    DetectionRecord,
    Envelope,
    IntegrityError,
    MirroredCell,
    SemanticCheckError,
    StateRedundancyError,
    hash64,
    hash64_update,
    seal,
    verify_open,
)
from .harness import (
    ExperimentRow,
    RunOutcome,
    RunResult,
    experiment_row,
    format_table,
    run_experiment,
    run_scenario,
    write_runs,
    write_table,
    write_trace,
)
from .hashapp import HashTableApp, Operation, OpKind, make_element
from .messages import (
    BallotNumber,
    ClientRequestMsg,
    DecisionMsg,
    PrepareMsg,
    PromiseMsg,
    ProposalMsg,
    SlotRequestMsg,
    Value,
    VoteMsg,
    decode_message,
    encode_message,
)
from .replica import Replica
from .sim import Simulation, format_trace
from .validation import (
    DivergenceValidator,
    StateChecksum,
    ValidationOutcome,
    most_common_checksum,
)

__version__ = "0.1.0"
