"""One replica of the replicated state machine.

Every replica plays all four consensus roles. A coordinator batches
client ops and proposes one batch per slot; acceptors vote on proposals
and broadcast their votes to every replica; each learner counts the
votes it sees and commits a slot the moment a majority voted for one
value, without waiting for a separate decision message. The proposer of
a committed slot additionally broadcasts a decision, which only matters
when vote messages were lost, and acknowledges the client ops it
batched.

Coordinator change is driven by a local progress timer. A stalled
replica adopts ballot (highest round seen + 1, own id) and prepares;
acceptors answer with the votes they hold for slots not yet decided
locally plus their highest decided slot, and the new coordinator
re-proposes reported values before touching fresh slots. Stragglers
catch up by periodically asking a random peer for decisions above
their own cursor.

Fault handling is crash-stop: the first detected anomaly (integrity,
semantic, mirrored state, divergence, or conflicting decision evidence)
aborts the replica, which then neither processes nor sends anything.
"""

from .faults import ReplicaInjector
from .hardening import (
    DetectionKind,
    DetectionRecord,
    IntegrityError,
    MirroredCell,
    SemanticCheckError,
    StateRedundancyError,
)
from .hashapp import HashTableApp, OpKind
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
    encode_log_record,
)
from .hashapp import encode_checkpoint
from .validation import DivergenceValidator, StateChecksum, ValidationOutcome

TAG_BATCH = 0
TAG_PROGRESS = 1
TAG_RECOVER = 2
TIMER_NAMES = ("BATCH", "PROGRESS", "RECOVER")


class DetectionAbort(Exception):
    """Raised at a detection site; unwound to the dispatcher, which aborts the replica."""

    def __init__(self, record: DetectionRecord):
        super().__init__(record.detail)
        self.record = record


class Replica:
    __slots__ = (
        "rid", "sim", "cfg", "quorum", "alive", "abort_record", "injector",
        "app", "transitions", "validator", "storage",
        "promised", "accepted",
        "decided", "applied_slot", "max_decided", "max_slot_seen", "tallies",
        "active_ballot", "is_coordinator", "candidate_ballot", "promises",
        "next_slot", "proposals", "acks_pending", "batch",
        "batch_armed", "progress_armed", "last_mark", "forwards_since",
        "lag_strikes", "last_pull_applied",
    )

    def __init__(self, rid: int, sim, cfg):
        self.rid = rid
        self.sim = sim
        self.cfg = cfg
        self.quorum = cfg.quorum
        self.alive = True
        self.abort_record: DetectionRecord | None = None
        self.injector = ReplicaInjector(sim.registry, rid, sim)
        self.app = HashTableApp()
        self.transitions = MirroredCell(0)
        self.validator = DivergenceValidator(
            rid, cfg.quorum, StateChecksum(1, self.app.digest())
        )
        self.storage = sim.new_storage(self.injector)

        # acceptor: highest promised ballot, votes held for undecided slots
        self.promised = BallotNumber(0, 0)
        self.accepted: dict[int, tuple[BallotNumber, Value]] = {}

        # learner
        self.decided: dict[int, Value] = {}
        self.applied_slot = -1
        self.max_decided = -1
        self.max_slot_seen = -1
        self.tallies: dict[tuple[int, BallotNumber], list] = {}

        # coordinator / proposer; replica 0 owns round 0 from the start
        self.active_ballot = BallotNumber(0, 0)
        self.is_coordinator = rid == 0
        self.candidate_ballot: BallotNumber | None = None
        self.promises: dict[int, PromiseMsg] = {}
        self.next_slot = 0
        self.proposals: dict[int, Value] = {}
        self.acks_pending: dict[int, tuple[Value, int]] = {}
        self.batch: list = []

        self.batch_armed = False
        self.progress_armed = False
        self.last_mark = (0, 0)
        self.forwards_since = 0
        self.lag_strikes = 0
        self.last_pull_applied = -1

        sim.schedule_timer(rid, TAG_RECOVER, cfg.recover_idle_ms)

    # ------------------------------------------------------------- dispatch

    def on_message(self, sender: int, msg) -> None:
        kind = type(msg)
        if kind is VoteMsg:
            self.on_vote(msg)
        elif kind is ProposalMsg:
            self.on_propose(msg)
        elif kind is DecisionMsg:
            self.on_decision(msg)
        elif kind is ClientRequestMsg:
            self.on_client_request(msg)
        elif kind is PrepareMsg:
            self.on_prepare(msg)
        elif kind is PromiseMsg:
            self.on_promise(msg)
        elif kind is SlotRequestMsg:
            self.on_slot_request(msg)
        else:
            raise TypeError("unroutable message %r" % msg)

    def on_timer(self, tag: int) -> None:
        if tag == TAG_BATCH:
            self.batch_armed = False
            if self.batch:
                self._flush_batch()
        elif tag == TAG_PROGRESS:
            self._progress_check()
        else:
            self._recover_tick()

    # ------------------------------------------------------------- client side

    def on_client_op(self, op) -> None:
        self._enqueue_ops((op,))

    def on_client_request(self, msg: ClientRequestMsg) -> None:
        self._enqueue_ops(msg.ops)

    def _enqueue_ops(self, ops) -> None:
        batch = self.batch
        limit = self.cfg.batch
        for op in ops:
            batch.append(op)
            if len(batch) >= limit:
                self._flush_batch()
        if self.batch and not self.batch_armed:
            self.batch_armed = True
            self.sim.schedule_timer(self.rid, TAG_BATCH, self.cfg.batch_timeout_ms)
        if not self.progress_armed:
            self._arm_progress()

    def _flush_batch(self) -> None:
        if not self.batch:
            return
        limit = self.cfg.batch
        if self.is_coordinator:
            while self.batch:
                chunk = tuple(self.batch[:limit])
                del self.batch[:limit]
                self._propose_fresh(Value(chunk))
        elif self.active_ballot.proposer != self.rid:
            coord = self.active_ballot.proposer
            while self.batch:
                chunk = tuple(self.batch[:limit])
                del self.batch[:limit]
                self.sim.send(self.rid, coord, ClientRequestMsg(self.rid, chunk))
                self.forwards_since += len(chunk)
        # else: candidate for coordinator; hold the batch until activation
        if self.batch and not self.batch_armed:
            self.batch_armed = True
            self.sim.schedule_timer(self.rid, TAG_BATCH, self.cfg.batch_timeout_ms)

    def _propose_fresh(self, value: Value) -> None:
        slot = self.next_slot
        self.next_slot = slot + 1
        self.proposals[slot] = value
        self.acks_pending[slot] = (value, len(value.ops))
        if slot > self.max_slot_seen:
            self.max_slot_seen = slot
        self.sim.broadcast(self.rid, ProposalMsg(self.active_ballot, slot, value))

    # ------------------------------------------------------------- acceptor

    def _observe_ballot(self, b: BallotNumber) -> None:
        if b > self.active_ballot:
            self.active_ballot = b
            self.is_coordinator = False
        if self.candidate_ballot is not None and b > self.candidate_ballot:
            self.candidate_ballot = None
            self.promises = {}

    def on_prepare(self, msg: PrepareMsg) -> None:
        b = msg.ballot
        if b < self.promised:
            return  # stale candidacy; it will retry or observe us
        self.promised = b
        self._observe_ballot(b)
        if self.injector.acceptor_forget_history():
            accepted = ()
        else:
            accepted = tuple(
                (slot, ab, av)
                for slot, (ab, av) in sorted(self.accepted.items())
                if slot >= msg.from_slot
            )
        self.sim.send(
            self.rid,
            b.proposer,
            PromiseMsg(b, self.rid, accepted, self.max_decided),
        )

    def on_propose(self, msg: ProposalMsg) -> None:
        b = msg.ballot
        if b < self.promised:
            return
        self.promised = b
        self._observe_ballot(b)
        slot = msg.slot
        if slot > self.max_slot_seen:
            self.max_slot_seen = slot
        # The vote record is never dropped, not even once the slot is
        # decided: promise quorums must keep intersecting every vote
        # quorum or gap filling below would be unsound.
        prev = self.accepted.get(slot)
        if prev is None or b >= prev[0]:
            self.accepted[slot] = (b, msg.value)
        self.sim.broadcast(
            self.rid,
            VoteMsg(b, slot, msg.value, self.rid, self.validator.local_checksum),
        )

    # ------------------------------------------------------------- learner

    def on_vote(self, msg: VoteMsg) -> None:
        slot = msg.slot
        if slot > self.max_slot_seen:
            self.max_slot_seen = slot
        if msg.ballot > self.active_ballot:
            self._observe_ballot(msg.ballot)
        if msg.acceptor != self.rid:
            try:
                outcome = self.validator.receive_voting_checksum(
                    msg.state_checksum, msg.acceptor
                )
            except IntegrityError as e:
                self._detect(DetectionKind.INTEGRITY, str(e))
            if outcome is ValidationOutcome.DIVERGED:
                self._detect_divergence()

        value = msg.value
        existing = self.decided.get(slot)
        if existing is not None and (existing is value or existing == value):
            # The slot is settled with this very value; further agreeing
            # votes carry no information. Disagreeing ones still take the
            # full path below and can surface a decision conflict.
            return

        key = (slot, msg.ballot)
        entries = self.tallies.get(key)
        if entries is None:
            entries = []
            self.tallies[key] = entries
        voters = None
        for v, vs in entries:
            if v is value or v == value:
                voters = vs
            elif msg.acceptor in vs:
                self._detect(
                    DetectionKind.INTEGRITY,
                    "replica %d voted twice with different values for slot %d"
                    % (msg.acceptor, slot),
                )
        if voters is None:
            voters = set()
            entries.append((value, voters))
        voters.add(msg.acceptor)
        if len(voters) == self.quorum:
            self._on_quorum(slot, value)
        elif slot not in self.decided and self.injector.learner_commit_short():
            self._commit(slot, value, "short")

    def _on_quorum(self, slot: int, value: Value) -> None:
        existing = self.decided.get(slot)
        if existing is not None:
            if existing is not value and existing != value:
                self._detect(
                    DetectionKind.DECISION_CONFLICT,
                    "vote quorum for slot %d contradicts the decided value" % slot,
                )
            return
        self._commit(slot, value, "votes")

    def on_decision(self, msg: DecisionMsg) -> None:
        if msg.slot > self.max_slot_seen:
            self.max_slot_seen = msg.slot
        self._commit(msg.slot, msg.value, "decision")

    def _commit(self, slot: int, value: Value, how: str) -> None:
        existing = self.decided.get(slot)
        if existing is not None:
            if existing is not value and existing != value:
                self._detect(
                    DetectionKind.DECISION_CONFLICT,
                    "slot %d decided twice with different values" % slot,
                )
            return
        self.decided[slot] = value
        if slot > self.max_decided:
            self.max_decided = slot
        mine = self.proposals.pop(slot, None)
        sim = self.sim
        if sim.trace is not None:
            sim.trace_line(self.rid, "COMMIT", "slot=%d ops=%d how=%s" % (slot, len(value.ops), how))
        pend = self.acks_pending.pop(slot, None)
        if pend is not None and (pend[0] is value or pend[0] == value):
            if sim.trace is not None:
                sim.trace_line(self.rid, "ACK", "slot=%d ops=%d" % (slot, pend[1]))
        if mine is not None and how == "votes":
            sim.broadcast(self.rid, DecisionMsg(slot, value))
        sim.last_progress = sim.now
        self._drain_applies()

    def _drain_applies(self) -> None:
        decided = self.decided
        while True:
            slot = self.applied_slot + 1
            value = decided.get(slot)
            if value is None:
                break
            self._apply_slot(slot, value)
        if self.max_slot_seen > self.applied_slot:
            self._arm_progress()

    def _apply_slot(self, slot: int, value: Value) -> None:
        injector = self.injector
        index = self.storage.log_append(encode_log_record(slot, value))
        if injector.log_specs:
            # Read-back verification can only fail through an injected
            # corruption, so it runs just where one is configured.
            try:
                self.storage.log_read(index)
            except IntegrityError:
                self._detect(DetectionKind.INTEGRITY, "log record %d corrupt" % index)
        sim = self.sim
        window = self.cfg.window
        ckpt = self.cfg.checkpoint_interval
        app_apply = self.app.apply
        advance = self.transitions.increment
        tamper = sim.tamper
        for op in value.ops:
            try:
                app_apply(op, injector)
            except SemanticCheckError as e:
                self._detect(DetectionKind.SEMANTIC, str(e))
            if op.kind is OpKind.LIST:
                continue
            try:
                t = advance()
            except StateRedundancyError as e:
                self._detect(DetectionKind.STATE_REDUNDANCY, str(e))
            if tamper is not None:
                repl = tamper.get((self.rid, t))
                if repl is not None:
                    self.app.tamper_swap_element(repl)
            if t % window == 0:
                self._generate_checksum(t)
            if t % ckpt == 0:
                self._write_checkpoint(t)
        self.applied_slot = slot
        sim.last_progress = sim.now

    def _generate_checksum(self, t: int) -> None:
        try:
            digest = self.app.digest()
        except StateRedundancyError as e:
            self._detect(DetectionKind.STATE_REDUNDANCY, str(e))
        cs = StateChecksum(t + 1, digest)
        sim = self.sim
        sim.window_log.append((self.rid, t + 1, digest))
        if sim.trace is not None:
            sim.trace_line(self.rid, "WINDOW", "gen=%d hash=%016x" % (t + 1, digest))
        if self.validator.advance_window(cs) is ValidationOutcome.DIVERGED:
            self._detect_divergence()

    def _write_checkpoint(self, t: int) -> None:
        self.storage.checkpoint_save(encode_checkpoint(self.app, t))
        if self.injector.ckpt_specs:
            try:
                self.storage.checkpoint_load()
            except IntegrityError:
                self._detect(DetectionKind.INTEGRITY, "checkpoint corrupt at %d" % t)
        if self.sim.trace is not None:
            self.sim.trace_line(self.rid, "CKPT", "transitions=%d" % t)

    # ------------------------------------------------------------- coordinator

    def on_promise(self, msg: PromiseMsg) -> None:
        if msg.ballot != self.candidate_ballot:
            return
        self.promises[msg.acceptor] = msg
        if len(self.promises) < self.quorum:
            return
        promises = list(self.promises.values())
        self.is_coordinator = True
        self.active_ballot = self.candidate_ballot
        self.candidate_ballot = None
        self.promises = {}

        if self.injector.coordinator_forget_values():
            merged: dict[int, tuple[BallotNumber, Value]] = {}
            reported_decided = self.max_decided
        else:
            merged = {}
            reported_decided = self.max_decided
            for p in promises:
                if p.max_decided > reported_decided:
                    reported_decided = p.max_decided
                for slot, ballot, value in p.accepted:
                    cur = merged.get(slot)
                    if cur is None or ballot > cur[0]:
                        merged[slot] = (ballot, value)

        floor = self.next_slot
        for bound in (reported_decided + 1, self.max_slot_seen + 1):
            if bound > floor:
                floor = bound
        if merged:
            top = max(merged) + 1
            if top > floor:
                floor = top
        self.next_slot = floor

        for slot in sorted(merged):
            if slot not in self.decided:
                self.proposals[slot] = merged[slot][1]
        # Any remaining gap provably holds no chosen value: a choice
        # reaches a vote quorum, every promise quorum intersects it, and
        # acceptors report all votes from from_slot up. Filling gaps
        # with no-ops unblocks replicas waiting behind slots whose
        # proposer died or whose proposal was wholly lost.
        noop = Value(())
        for slot in range(self.applied_slot + 1, self.next_slot):
            if slot not in self.decided and slot not in self.proposals:
                self.proposals[slot] = noop
        for slot in sorted(self.proposals):
            self.sim.broadcast(
                self.rid, ProposalMsg(self.active_ballot, slot, self.proposals[slot])
            )
        self._flush_batch()
        self._arm_progress()

    # ------------------------------------------------------------- timers

    def _arm_progress(self) -> None:
        # The jitter desynchronizes stalled replicas so one candidacy
        # wins before the next starts instead of perpetual dueling.
        if not self.progress_armed:
            self.progress_armed = True
            delay = self.cfg.failover_timeout_ms * (1.0 + 0.5 * self.sim.rng.random())
            self.sim.schedule_timer(self.rid, TAG_PROGRESS, delay)

    def _progress_check(self) -> None:
        self.progress_armed = False
        lag = self.applied_slot < self.max_slot_seen
        own_work = bool(self.proposals) or bool(self.batch) or self.forwards_since > 0
        # Progress means the head moved, not that the frontier grew: a
        # single unresolvable slot must stall the mark even while later
        # slots keep deciding, or it would starve behind them forever.
        mark = (
            self.applied_slot,
            min(self.proposals) if self.proposals else -1,
        )
        stalled = mark == self.last_mark
        if stalled and (own_work or lag):
            if self.is_coordinator and self.proposals:
                # Still leading: nudge the undecided slots at the
                # current ballot before resorting to a new round.
                for slot in sorted(self.proposals):
                    self.sim.broadcast(
                        self.rid,
                        ProposalMsg(self.active_ballot, slot, self.proposals[slot]),
                    )
            elif own_work or self.lag_strikes >= 1:
                self._initiate_failover()
            else:
                # Pure lag: give catch-up pulls one more period first.
                self.lag_strikes += 1
        else:
            self.lag_strikes = 0
        self.last_mark = mark
        self.forwards_since = 0
        if own_work or lag:
            self._arm_progress()

    def _initiate_failover(self) -> None:
        round_ = max(self.promised.round, self.active_ballot.round) + 1
        self.candidate_ballot = BallotNumber(round_, self.rid)
        self.promises = {}
        self.sim.broadcast(
            self.rid, PrepareMsg(self.candidate_ballot, self.applied_slot + 1)
        )

    def _recover_tick(self) -> None:
        lag = self.max_slot_seen - self.applied_slot
        advance = self.applied_slot - self.last_pull_applied
        if lag > 0 and (advance < 32 or lag > 128):
            # Applies near-stalled, or far enough behind that ordinary
            # traffic will not close the gap: fetch decisions above our
            # cursor from a random peer.
            n = self.cfg.replicas
            peer = self.sim.rng.randrange(n - 1)
            if peer >= self.rid:
                peer += 1
            self.sim.send(self.rid, peer, SlotRequestMsg(self.rid, self.applied_slot + 1))
            self._arm_progress()
        self.last_pull_applied = self.applied_slot
        period = self.cfg.recover_fast_ms if lag > 0 else self.cfg.recover_idle_ms
        self.sim.schedule_timer(self.rid, TAG_RECOVER, period)

    def on_slot_request(self, msg: SlotRequestMsg) -> None:
        slot = msg.from_slot
        sent = 0
        limit = self.cfg.catchup_max_slots
        top = self.max_decided
        while slot <= top and sent < limit:
            value = self.decided.get(slot)
            if value is not None:
                self.sim.send(self.rid, msg.requester, DecisionMsg(slot, value))
                sent += 1
            slot += 1

    # ------------------------------------------------------------- detection

    def _detect(self, kind: DetectionKind, detail: str) -> None:
        raise DetectionAbort(
            DetectionRecord(kind, self.rid, self.transitions.peek(), detail)
        )

    def _detect_divergence(self) -> None:
        v = self.validator
        raise DetectionAbort(
            DetectionRecord(
                DetectionKind.DIVERGENCE,
                self.rid,
                v.generation,
                "window %d: local state %016x contradicts a peer quorum"
                % (v.generation, v.local_hash),
            )
        )

    def finish_abort(self, record: DetectionRecord) -> None:
        self.alive = False
        self.abort_record = record
        self.sim.note_abort(self.rid, record)
