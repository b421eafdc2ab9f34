"""Classification of consecutive intra-case actor transitions.

Every pair of consecutive events within a case falls into exactly one of four
types once both actors are known:

* Continuation: same actor, no other work by that actor strictly inside the
  time gap.
* Interruption: same actor, but they touched a different case inside the gap.
* HandoverIdle: different receiving actor who was idle during the gap.
* HandoverBusy: different receiving actor who worked another case in the gap.

The witness interval is open: events at exactly the endpoint timestamps never
count as interposed. Because consecutive same-case events admit no same-case
event strictly between them, the busy/interrupted checks reduce to "any event
by that actor strictly inside the gap, excluding events of this case", which
the ActorIndex answers in O(log n).
"""

from __future__ import annotations

import csv
import enum
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import IO

from .event_log import Event, EventLog, UTC

_EPOCH = datetime(1970, 1, 1, tzinfo=UTC)
_MICRO = timedelta(microseconds=1)


class BehaviorType(enum.Enum):
    CONTINUATION = "C"
    INTERRUPTION = "I"
    HANDOVER_IDLE = "HI"
    HANDOVER_BUSY = "HB"

    def __str__(self) -> str:
        return self.value


def _micros(ts: datetime) -> int:
    # exact integer microseconds; float epoch seconds lose sub-microsecond
    # precision and can collapse adjacent instants
    return (ts - _EPOCH) // _MICRO


@dataclass
class ActorIndex:
    """Per-actor sorted event times, split further by case.

    ``times[actor]`` holds microsecond timestamps of all that actor's events
    in canonical order; ``case_times[(actor, case)]`` the subset for one case.
    Both are sorted, so "does this actor have an event strictly inside
    (t_lo, t_hi) outside case c" is two bisections.
    """

    times: dict[str, list[int]]
    case_times: dict[tuple[str, str], list[int]]

    def has_event_outside_case(
        self, actor: str, case_id: str, t_lo: int, t_hi: int
    ) -> bool:
        """True if actor has an event with t_lo < t < t_hi not in case_id."""
        if t_hi <= t_lo:
            return False
        all_times = self.times.get(actor)
        if not all_times:
            return False
        total = bisect_left(all_times, t_hi) - bisect_right(all_times, t_lo)
        if total == 0:
            return False
        own = self.case_times.get((actor, case_id))
        if own:
            total -= bisect_left(own, t_hi) - bisect_right(own, t_lo)
        return total > 0


def build_actor_index(log: EventLog) -> ActorIndex:
    """Index all events that carry an actor; actorless events are skipped."""
    times: dict[str, list[int]] = {}
    case_times: dict[tuple[str, str], list[int]] = {}
    for e in log.events:
        if e.actor is None:
            continue
        t = _micros(e.timestamp)
        times.setdefault(e.actor, []).append(t)
        case_times.setdefault((e.actor, e.case_id), []).append(t)
    # canonical log order is already time-sorted, but sorting keeps the
    # invariant independent of caller discipline
    for lst in times.values():
        lst.sort()
    for lst in case_times.values():
        lst.sort()
    return ActorIndex(times=times, case_times=case_times)


@dataclass(frozen=True)
class Transition:
    """A classified consecutive-event pair within one case."""

    case_id: str
    from_event: int  # position in the canonical log
    to_event: int
    from_actor: str
    to_actor: str
    behavior: BehaviorType
    from_timestamp: datetime
    to_timestamp: datetime
    to_activity: str | None = None  # receiving event's label, when available


def classify_transition(e_i: Event, e_j: Event, index: ActorIndex) -> BehaviorType | None:
    """Classify a single consecutive same-case pair; None if an actor is missing."""
    if e_i.actor is None or e_j.actor is None:
        return None
    t_lo, t_hi = _micros(e_i.timestamp), _micros(e_j.timestamp)
    if e_i.actor == e_j.actor:
        busy = index.has_event_outside_case(e_i.actor, e_i.case_id, t_lo, t_hi)
        return BehaviorType.INTERRUPTION if busy else BehaviorType.CONTINUATION
    busy = index.has_event_outside_case(e_j.actor, e_j.case_id, t_lo, t_hi)
    return BehaviorType.HANDOVER_BUSY if busy else BehaviorType.HANDOVER_IDLE


@dataclass
class ClassificationResult:
    transitions: list[Transition]
    skipped_pairs: int


def classify_log(log: EventLog, index: ActorIndex | None = None) -> ClassificationResult:
    """Classify every consecutive same-case pair with both actors defined.

    Pairs touching an actorless event are skipped and counted. Output is
    ordered by the position of the receiving event in the canonical log,
    which is deterministic for a validated log.
    """
    if not log.sorted:
        raise ValueError("log must be validated and sorted first")
    if index is None:
        index = build_actor_index(log)
    transitions: list[Transition] = []
    skipped = 0
    last_pos: dict[str, int] = {}
    for pos, e_j in enumerate(log.events):
        prev = last_pos.get(e_j.case_id)
        last_pos[e_j.case_id] = pos
        if prev is None:
            continue
        e_i = log.events[prev]
        behavior = classify_transition(e_i, e_j, index)
        if behavior is None:
            skipped += 1
            continue
        transitions.append(
            Transition(
                case_id=e_j.case_id,
                from_event=prev,
                to_event=pos,
                from_actor=e_i.actor,  # type: ignore[arg-type]
                to_actor=e_j.actor,  # type: ignore[arg-type]
                behavior=behavior,
                from_timestamp=e_i.timestamp,
                to_timestamp=e_j.timestamp,
                to_activity=e_j.activity,
            )
        )
    return ClassificationResult(transitions=transitions, skipped_pairs=skipped)


def write_transitions_csv(transitions: list[Transition], destination: str | IO[str]) -> None:
    own = destination if not isinstance(destination, str) else open(
        destination, "w", encoding="utf-8", newline=""
    )
    try:
        writer = csv.writer(own)
        writer.writerow(["case_id", "from_ts", "to_ts", "from_actor", "to_actor", "behavior"])
        for t in transitions:
            writer.writerow(
                [
                    t.case_id,
                    t.from_timestamp.astimezone(UTC).isoformat(),
                    t.to_timestamp.astimezone(UTC).isoformat(),
                    t.from_actor,
                    t.to_actor,
                    t.behavior.value,
                ]
            )
    finally:
        if isinstance(destination, str):
            own.close()


def read_transitions_csv(source: str | IO[str]) -> list[Transition]:
    """Load a transitions dump written by :func:`write_transitions_csv`.

    Event positions are not stored in the dump; they are filled with -1 and
    only the fields needed for series construction survive the round trip.
    """
    own = source if not isinstance(source, str) else open(source, "r", encoding="utf-8", newline="")
    try:
        reader = csv.DictReader(own)
        out: list[Transition] = []
        for row in reader:
            out.append(
                Transition(
                    case_id=row["case_id"],
                    from_event=-1,
                    to_event=-1,
                    from_actor=row["from_actor"],
                    to_actor=row["to_actor"],
                    behavior=BehaviorType(row["behavior"]),
                    from_timestamp=datetime.fromisoformat(row["from_ts"]),
                    to_timestamp=datetime.fromisoformat(row["to_ts"]),
                )
            )
        return out
    finally:
        if isinstance(source, str):
            own.close()
