"""Declarative fault injection.

Faults are declared as (point, mode, targets) specs and evaluated at
fixed hook points inside the replica and the simulated environment; the
protocol code never special-cases any concrete experiment. Corruption
actions flip payload bytes while leaving the attached checksum alone,
mimicking memory corruption between the integrity boundary and use.
Protocol deviation actions make a role misbehave in a structured way:
a learner commits on a single vote, an acceptor reports an empty vote
history, a coordinator ignores the promised values it collected.

SINGLE_TIMED specs fire exactly once per targeted replica, at the first
hook traversal at or after the configured delay. PROBABILITY specs draw
from the run's RNG once per traversal.
"""

from dataclasses import dataclass, field
from enum import Enum


class InjectionPoint(Enum):
    NET_MSG_RECEIVED = "NET_MSG_RECEIVED"
    STORAGE_LOG_READ = "STORAGE_LOG_READ"
    CHECKPOINT_READ = "CHECKPOINT_READ"
    APP_ADD_ELEMENT = "APP_ADD_ELEMENT"
    LEARNER_COMMIT_QUORUM = "LEARNER_COMMIT_QUORUM"
    ACCEPTOR_PROMISE_HISTORY = "ACCEPTOR_PROMISE_HISTORY"
    COORDINATOR_PROMISE_VALUES = "COORDINATOR_PROMISE_VALUES"


class InjectionMode(Enum):
    SINGLE_TIMED = "SINGLE_TIMED"
    PROBABILITY = "PROBABILITY"


@dataclass(frozen=True)
class InjectionSpec:
    point: InjectionPoint
    mode: InjectionMode
    delay_ms: float = 0.0
    probability: float = 0.0
    replicas: frozenset[int] | None = None  # None targets every replica
    action: str = "mangle"  # APP_ADD_ELEMENT only: mangle | skip

    def targets(self, replica_id: int) -> bool:
        return self.replicas is None or replica_id in self.replicas


@dataclass
class InjectionCounters:
    total: int = 0
    by_point: dict = field(default_factory=dict)

    def hit(self, point: InjectionPoint) -> None:
        self.total += 1
        self.by_point[point] = self.by_point.get(point, 0) + 1


class InjectionRegistry:
    """Resolved view of the spec list for one run."""

    def __init__(self, specs: tuple[InjectionSpec, ...], n_replicas: int):
        self.counters = InjectionCounters()
        self._by_replica_point: dict[tuple[int, InjectionPoint], list[InjectionSpec]] = {}
        self._timed_done: set[tuple[int, int]] = set()  # (spec index, replica)
        self._spec_index = {id(s): i for i, s in enumerate(specs)}
        for rid in range(n_replicas):
            for spec in specs:
                if spec.targets(rid):
                    key = (rid, spec.point)
                    self._by_replica_point.setdefault(key, []).append(spec)

    def specs_at(self, replica_id: int, point: InjectionPoint):
        return self._by_replica_point.get((replica_id, point))

    def should_fire(self, spec: InjectionSpec, replica_id: int, now: float, rng) -> bool:
        if spec.mode is InjectionMode.SINGLE_TIMED:
            if now < spec.delay_ms:
                return False
            key = (self._spec_index[id(spec)], replica_id)
            if key in self._timed_done:
                return False
            self._timed_done.add(key)
        else:
            if rng.random() >= spec.probability:
                return False
        self.counters.hit(spec.point)
        return True


def flip_byte(payload: bytes, rng) -> bytes:
    """Corrupt one byte at an RNG-chosen offset, guaranteed to change it."""
    if not payload:
        return payload
    pos = rng.randrange(len(payload))
    mask = rng.randint(1, 255)
    return payload[:pos] + bytes((payload[pos] ^ mask,)) + payload[pos + 1:]


class ReplicaInjector:
    """Hook evaluation bound to one replica of one run.

    The specs for each point are resolved once at construction, so in
    the common no-injection case every hook is an attribute load and a
    truth test: no call, no RNG state consumed, and the simulation is
    byte-identical to one with no injector at all.
    """

    __slots__ = (
        "registry", "replica_id", "sim",
        "net_specs", "log_specs", "ckpt_specs", "add_specs",
        "_learner", "_acceptor", "_coord",
    )

    def __init__(self, registry: InjectionRegistry, replica_id: int, sim):
        self.registry = registry
        self.replica_id = replica_id
        self.sim = sim
        at = registry.specs_at
        self.net_specs = tuple(at(replica_id, InjectionPoint.NET_MSG_RECEIVED) or ())
        self.log_specs = tuple(at(replica_id, InjectionPoint.STORAGE_LOG_READ) or ())
        self.ckpt_specs = tuple(at(replica_id, InjectionPoint.CHECKPOINT_READ) or ())
        self.add_specs = tuple(at(replica_id, InjectionPoint.APP_ADD_ELEMENT) or ())
        self._learner = tuple(at(replica_id, InjectionPoint.LEARNER_COMMIT_QUORUM) or ())
        self._acceptor = tuple(at(replica_id, InjectionPoint.ACCEPTOR_PROMISE_HISTORY) or ())
        self._coord = tuple(at(replica_id, InjectionPoint.COORDINATOR_PROMISE_VALUES) or ())

    def _fired(self, specs) -> bool:
        fired = False
        for spec in specs:
            if self.registry.should_fire(spec, self.replica_id, self.sim.now, self.sim.rng):
                fired = True
        return fired

    def corrupt_network_payload(self, payload: bytes) -> bytes:
        if self.net_specs and self._fired(self.net_specs):
            return flip_byte(payload, self.sim.rng)
        return payload

    def corrupt_log_payload(self, payload: bytes) -> bytes:
        if self.log_specs and self._fired(self.log_specs):
            return flip_byte(payload, self.sim.rng)
        return payload

    def corrupt_checkpoint_payload(self, payload: bytes) -> bytes:
        if self.ckpt_specs and self._fired(self.ckpt_specs):
            return flip_byte(payload, self.sim.rng)
        return payload

    def filter_app_add(self, elem: bytes) -> bytes | None:
        """Returns the bytes to insert, or None to skip the insert."""
        if not self.add_specs:
            return elem
        out: bytes | None = elem
        for spec in self.add_specs:
            if self.registry.should_fire(spec, self.replica_id, self.sim.now, self.sim.rng):
                if spec.action == "skip":
                    out = None
                else:
                    out = str(self.sim.rng.getrandbits(63)).encode("utf-8")
        return out

    def learner_commit_short(self) -> bool:
        return bool(self._learner) and self._fired(self._learner)

    def acceptor_forget_history(self) -> bool:
        return bool(self._acceptor) and self._fired(self._acceptor)

    def coordinator_forget_values(self) -> bool:
        return bool(self._coord) and self._fired(self._coord)
