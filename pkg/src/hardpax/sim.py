"""Deterministic discrete-event simulation of a replica group.

One heap of (time_ms, seq, kind, target, a, b) tuples drives message
deliveries, timers, and client-op arrivals; seq breaks time ties in
schedule order, so a run is a pure function of (config, seed).

A single generator seeded per run supplies every stochastic draw in
dispatch order. Sending a message draws, per destination: the loss
draw; then, only if kept, the delay draw, the duplication draw, and,
only if duplicated, the duplicate's delay draw. Fault injection draws
happen inside the handler that owns the injection point; a stalled
catch-up tick draws one peer choice, and arming a progress timer draws
one jitter value.

The network is lossy, duplicating, and reordering but not partitioning,
and a broadcast is sent to all replicas including the sender through
the same lossy path. Every payload crosses the wire sealed with its
checksum; a delivery that fails verification is recorded as an
integrity detection and dropped without aborting the receiver, since a
bad message, unlike bad storage, leaves local state intact. Because the
fault injector is the only thing that can corrupt a payload in flight,
the verification is evaluated only on replicas with a configured
network corruption source; everywhere else its outcome is statically
known and skipping it leaves the run byte-identical.

A run ends when all client ops have arrived, no messages are in
flight, and every running replica has empty batches, no unresolved
proposals, and has applied every slot decided by any running replica;
or when every replica has aborted; or when a watchdog sees no commit
or apply progress for a long stretch (a stuck run, reported as such).
"""

import heapq
import random

from .config import ScenarioConfig
from .faults import InjectionPoint, InjectionRegistry
from .hardening import (
    DetectionKind,
    DetectionRecord,
    Envelope,
    hash64,
    seal,
    verify_open,
)
from .hashapp import Operation, OpKind, make_element
from .messages import (
    ClientRequestMsg,
    DecisionMsg,
    PrepareMsg,
    PromiseMsg,
    ProposalMsg,
    SlotRequestMsg,
    VoteMsg,
    encode_message,
)
from .replica import DetectionAbort, Replica, TIMER_NAMES

DELIVER = 0
TIMER = 1
OP_ARRIVAL = 2


class StorageLog:
    """Sealed append-only record log plus a single sealed checkpoint cell.

    Reads re-verify the seal after passing the payload through the
    replica's fault injector, so an injected storage corruption surfaces
    as an integrity failure at the caller.
    """

    __slots__ = ("records", "checkpoint", "_injector")

    def __init__(self, injector):
        self.records: list[Envelope] = []
        self.checkpoint: Envelope | None = None
        self._injector = injector

    def log_append(self, payload: bytes) -> int:
        self.records.append(seal(payload))
        return len(self.records) - 1

    def log_read(self, index: int) -> bytes:
        env = self.records[index]
        payload = self._injector.corrupt_log_payload(env.payload)
        return verify_open(Envelope(payload, env.checksum))

    def checkpoint_save(self, payload: bytes) -> None:
        self.checkpoint = seal(payload)

    def checkpoint_load(self) -> bytes:
        env = self.checkpoint
        payload = self._injector.corrupt_checkpoint_payload(env.payload)
        return verify_open(Envelope(payload, env.checksum))


def _msg_brief(msg) -> str:
    kind = type(msg)
    if kind is VoteMsg:
        return "VOTE slot=%d b=%d.%d acc=%d gen=%d" % (
            msg.slot, msg.ballot.round, msg.ballot.proposer,
            msg.acceptor, msg.state_checksum.state_count,
        )
    if kind is ProposalMsg:
        return "PROPOSE slot=%d b=%d.%d ops=%d" % (
            msg.slot, msg.ballot.round, msg.ballot.proposer, len(msg.value.ops),
        )
    if kind is DecisionMsg:
        return "DECIDE slot=%d ops=%d" % (msg.slot, len(msg.value.ops))
    if kind is ClientRequestMsg:
        return "REQ from=%d ops=%d" % (msg.sender, len(msg.ops))
    if kind is PrepareMsg:
        return "PREPARE b=%d.%d" % (msg.ballot.round, msg.ballot.proposer)
    if kind is PromiseMsg:
        return "PROMISE b=%d.%d acc=%d held=%d dec=%d" % (
            msg.ballot.round, msg.ballot.proposer, msg.acceptor,
            len(msg.accepted), msg.max_decided,
        )
    return "PULL from=%d start=%d" % (msg.requester, msg.from_slot)


def format_trace(entry) -> str:
    return "%.3f %d %d %s %s" % entry


class Simulation:
    """One run: n replicas, a lossy network, storage, load, and faults."""

    def __init__(
        self,
        cfg: ScenarioConfig,
        seed: int,
        trace: bool = False,
        tamper: dict | None = None,
    ):
        self.cfg = cfg
        self.rng = random.Random(seed)
        self._loss = cfg.loss_prob
        self._dup = cfg.dup_prob
        self._dmin = cfg.delay_min_ms
        self._dmax = cfg.delay_max_ms
        self.now = 0.0
        self._seq = 0
        self._ord = 0
        self._heap: list = []
        self.trace: list | None = [] if trace else None
        self.tamper = tamper
        self.registry = InjectionRegistry(cfg.injections, cfg.replicas)
        # Wire payloads only matter when something can corrupt them:
        # handlers consume the decoded message object, so without a
        # network injection spec the encode/seal/verify chain has no
        # observable effect and the bytes are not built at all.
        self._encode_wire = any(
            spec.point is InjectionPoint.NET_MSG_RECEIVED
            for spec in cfg.injections
        )
        self.detections: list[DetectionRecord] = []
        self.window_log: list[tuple[int, int, int]] = []
        self.sends_after_abort = 0
        self.last_progress = 0.0
        self.timed_out = False
        self.inflight = 0
        self.arrivals_remaining = cfg.replicas * cfg.ops_per_replica
        self.running = cfg.replicas
        self._all_dests = tuple(range(cfg.replicas))
        self.replicas = [Replica(i, self, cfg) for i in range(cfg.replicas)]
        interval = 1000.0 / cfg.arrival_rate_per_s
        self._arrival_interval = interval
        if cfg.ops_per_replica > 0:
            for rid in range(cfg.replicas):
                self._push(interval, OP_ARRIVAL, rid, 1, None)

    # ------------------------------------------------------------- scheduling

    def _push(self, at: float, kind: int, target: int, a, b) -> None:
        heapq.heappush(self._heap, (at, self._seq, kind, target, a, b))
        self._seq += 1

    def schedule_timer(self, rid: int, tag: int, delay_ms: float) -> None:
        self._push(self.now + delay_ms, TIMER, rid, tag, None)

    def new_storage(self, injector) -> StorageLog:
        return StorageLog(injector)

    # ------------------------------------------------------------- network

    def send(self, sender: int, dest: int, msg) -> None:
        if not self.replicas[sender].alive:
            self.sends_after_abort += 1
            return
        env = seal(encode_message(msg)) if self._encode_wire else None
        self._transmit(sender, (dest,), (env, msg))

    def broadcast(self, sender: int, msg) -> None:
        if not self.replicas[sender].alive:
            self.sends_after_abort += 1
            return
        env = seal(encode_message(msg)) if self._encode_wire else None
        self._transmit(sender, self._all_dests, (env, msg))

    def _transmit(self, sender: int, dests, pair) -> None:
        # Per destination, in ascending id order: the loss draw, then for
        # a kept copy the delay draw, the duplication draw, and for a
        # duplicated copy its delay draw. The delay expression below is
        # exactly Random.uniform(delay_min, delay_max), inlined.
        tracing = self.trace is not None
        random_ = self.rng.random
        heap = self._heap
        push = heapq.heappush
        now = self.now
        loss = self._loss
        dup = self._dup
        dmin = self._dmin
        dspan = self._dmax - dmin
        seq = self._seq
        inflight = 0
        for dest in dests:
            if tracing:
                self.trace_line(sender, "SEND", "to=%d %s" % (dest, _msg_brief(pair[1])))
            if random_() < loss:
                continue
            push(heap, (now + dmin + dspan * random_(),
                        seq, DELIVER, dest, sender, pair))
            seq += 1
            inflight += 1
            if random_() < dup:
                push(heap, (now + dmin + dspan * random_(),
                            seq, DELIVER, dest, sender, pair))
                seq += 1
                inflight += 1
        self._seq = seq
        self.inflight += inflight

    # ------------------------------------------------------------- bookkeeping

    def trace_line(self, rid: int, kind: str, summary: str) -> None:
        self.trace.append((self.now, self._ord, rid, kind, summary))
        self._ord += 1

    def record_detection(self, record: DetectionRecord) -> None:
        self.detections.append(record)
        if self.trace is not None:
            self.trace_line(
                record.replica_id, "DETECT",
                "%s t=%d %s" % (record.kind.name, record.state_count, record.detail),
            )

    def note_abort(self, rid: int, record: DetectionRecord) -> None:
        self.running -= 1
        if self.trace is not None:
            self.trace_line(rid, "ABORT", record.kind.name)

    # ------------------------------------------------------------- main loop

    def run(self) -> None:
        heap = self._heap
        pop = heapq.heappop
        replicas = self.replicas
        cfg = self.cfg
        watchdog = cfg.watchdog_ms
        ops_per_replica = cfg.ops_per_replica
        interval = self._arrival_interval
        tracing = self.trace is not None

        while heap:
            t, _, kind, target, a, b = pop(heap)
            if t - self.last_progress > watchdog:
                self.timed_out = True
                break
            self.now = t

            if kind == DELIVER:
                self.inflight -= 1
                rep = replicas[target]
                if rep.alive:
                    env, msg = b
                    if tracing:
                        self.trace_line(
                            target, "DELIVER", "from=%d %s" % (a, _msg_brief(msg))
                        )
                    # The injector is the only corruption source between
                    # seal and delivery, so when none targets this replica
                    # the checksum re-check is a provable no-op: skipping
                    # it cannot change the run, only the time it takes.
                    inj = rep.injector
                    if not inj.net_specs or self._verify_delivery(env, inj, rep, a):
                        try:
                            rep.on_message(a, msg)
                        except DetectionAbort as e:
                            self.record_detection(e.record)
                            rep.finish_abort(e.record)
            elif kind == TIMER:
                rep = replicas[target]
                if rep.alive:
                    if tracing:
                        self.trace_line(target, "TIMER", TIMER_NAMES[a])
                    try:
                        rep.on_timer(a)
                    except DetectionAbort as e:
                        self.record_detection(e.record)
                        rep.finish_abort(e.record)
            else:
                self.arrivals_remaining -= 1
                if a < ops_per_replica:
                    self._push((a + 1) * interval, OP_ARRIVAL, target, a + 1, None)
                rep = replicas[target]
                if rep.alive:
                    op = Operation(OpKind.ADD, make_element(a, target))
                    if tracing:
                        self.trace_line(
                            target, "ARRIVE", "op=%s" % op.element.decode("utf-8")
                        )
                    try:
                        rep.on_client_op(op)
                    except DetectionAbort as e:
                        self.record_detection(e.record)
                        rep.finish_abort(e.record)

            if self.running == 0:
                break
            if (
                self.arrivals_remaining == 0
                and self.inflight == 0
                and self._quiescent()
            ):
                break

    def _verify_delivery(self, env, inj, rep, sender: int) -> bool:
        """Corrupt-then-verify an incoming payload. False drops it."""
        payload = inj.corrupt_network_payload(env.payload)
        if hash64(payload) == env.checksum:
            return True
        self.record_detection(DetectionRecord(
            DetectionKind.INTEGRITY, rep.rid, rep.transitions.peek(),
            "corrupt message from %d dropped" % sender,
        ))
        return False

    def _quiescent(self) -> bool:
        top = -1
        for rep in self.replicas:
            if rep.alive and rep.max_decided > top:
                top = rep.max_decided
        for rep in self.replicas:
            if rep.alive and (
                rep.batch or rep.proposals or rep.applied_slot < top
            ):
                return False
        return True
