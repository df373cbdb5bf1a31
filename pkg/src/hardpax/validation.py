"""Windowed cross-replica state validation.

Replicas attach a checksum of their application state to every vote
they broadcast. Because checksums are only regenerated every W applied
transitions, all correct replicas pass through the same checkpoint
states and eventually broadcast identical (state_count, hash) pairs.
Each replica collects the checksums of its peers for the generation it
is itself in; when a quorum of peers agrees on a hash that differs from
the local one, the local state has provably left the common history and
the replica must stop.

Two windows are tracked: the current one, keyed by the local
generation count, and a single backlog slot for the first later
generation observed (peers that run ahead). Anything that fits neither
is discarded; validation is opportunistic, not exhaustive, and a
discarded checksum costs only a missed detection opportunity.

The local replica's own checksum never counts toward the quorum: a
corrupted replica must not be able to vouch for itself.
"""

from dataclasses import dataclass
from enum import Enum

from .hardening import IntegrityError


@dataclass(frozen=True, slots=True)
class StateChecksum:
    """Application state hash labeled with the transition count it precedes.

    ``state_count`` is always 1 mod W: the checksum generated after
    applying transition k*W is labeled k*W + 1, the first transition it
    covers.
    """

    state_count: int
    hash: int


class ValidationOutcome(Enum):
    VALIDATED_OK = "VALIDATED_OK"
    STORED_BACKLOG = "STORED_BACKLOG"
    DISCARDED = "DISCARDED"
    DIVERGED = "DIVERGED"


def most_common_checksum(received: dict[int, int]) -> tuple[int | None, int]:
    """Modal hash among received checksums and its multiplicity.

    Ties break toward the numerically smallest hash so the result never
    depends on arrival order. Empty input yields (None, 0).
    """
    if not received:
        return None, 0
    counts: dict[int, int] = {}
    for h in received.values():
        counts[h] = counts.get(h, 0) + 1
    best = min(counts, key=lambda h: (-counts[h], h))
    return best, counts[best]


class DivergenceValidator:
    """Tracks one replica's current and backlog validation windows."""

    __slots__ = (
        "replica_id",
        "quorum",
        "generation",
        "local_hash",
        "window",
        "backlog_generation",
        "backlog",
    )

    def __init__(self, replica_id: int, quorum: int, local: StateChecksum):
        self.replica_id = replica_id
        self.quorum = quorum
        self.generation = local.state_count
        self.local_hash = local.hash
        self.window: dict[int, int] = {}
        self.backlog_generation: int | None = None
        self.backlog: dict[int, int] = {}

    @property
    def local_checksum(self) -> StateChecksum:
        return StateChecksum(self.generation, self.local_hash)

    def receive_voting_checksum(
        self, checksum: StateChecksum, sender: int
    ) -> ValidationOutcome:
        """File a peer checksum into the current window or the backlog.

        Raises IntegrityError if the same peer reports two different
        hashes for one generation; duplicates with equal content are
        ignored.
        """
        if sender == self.replica_id:
            return ValidationOutcome.DISCARDED
        gen = checksum.state_count
        if gen == self.generation:
            return self._store_and_check(checksum.hash, sender)
        if gen > self.generation:
            if self.backlog_generation is None:
                self.backlog_generation = gen
            if gen == self.backlog_generation:
                self._store(self.backlog, checksum.hash, sender, gen)
                return ValidationOutcome.STORED_BACKLOG
        return ValidationOutcome.DISCARDED

    def quorum_check(self) -> ValidationOutcome:
        """Compare the local hash against a quorum-agreed peer hash, if any."""
        modal, count = most_common_checksum(self.window)
        if count >= self.quorum and modal != self.local_hash:
            return ValidationOutcome.DIVERGED
        return ValidationOutcome.VALIDATED_OK

    def advance_window(self, local: StateChecksum) -> ValidationOutcome:
        """Move to the next locally generated checksum.

        Promotes the backlog when it holds exactly the new generation,
        re-running the quorum check over the promoted checksums; any
        other backlog content is stale or too far ahead and is dropped
        along with the old window.
        """
        self.generation = local.state_count
        self.local_hash = local.hash
        self.window = {}
        promoted = self.backlog if self.backlog_generation == local.state_count else None
        self.backlog = {}
        self.backlog_generation = None
        if promoted:
            for sender, h in promoted.items():
                outcome = self._store_and_check(h, sender)
                if outcome is ValidationOutcome.DIVERGED:
                    return outcome
        return ValidationOutcome.VALIDATED_OK

    def _store(self, bucket: dict[int, int], h: int, sender: int, gen: int) -> None:
        prev = bucket.get(sender)
        if prev is not None and prev != h:
            raise IntegrityError(
                "replica %d reported conflicting checksums for generation %d"
                % (sender, gen)
            )
        bucket[sender] = h

    def _store_and_check(self, h: int, sender: int) -> ValidationOutcome:
        self._store(self.window, h, sender, self.generation)
        if len(self.window) < self.quorum:
            return ValidationOutcome.VALIDATED_OK
        return self.quorum_check()
