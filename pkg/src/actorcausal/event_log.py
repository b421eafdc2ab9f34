"""Event log ingestion: CSV and minimal XES parsing plus canonical ordering.

An event is (case, activity, timestamp, actor). Logs are normalized to a
single canonical order: stable sort by (timestamp, original file position),
with all timestamps held in UTC.
"""

from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Mapping, Sequence

from .errors import EmptyLogError, ParseError, SchemaError

UTC = timezone.utc


@dataclass(frozen=True)
class Event:
    """One atomic event occurrence."""

    case_id: str
    activity: str
    timestamp: datetime  # tz-aware, UTC
    actor: str | None = None

    def __post_init__(self) -> None:
        if not self.case_id:
            raise ValueError("case_id must be non-empty")
        if not self.activity:
            raise ValueError("activity must be non-empty")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")


@dataclass
class EventLog:
    """An ordered collection of events with their original file ordinals.

    ``events[i]`` entered the source file at position ``sequence_index[i]``;
    after :func:`validate_and_sort` the events are globally ordered by
    (timestamp, sequence_index), which makes every per-case subsequence a
    well-defined trace.
    """

    events: list[Event]
    sequence_index: list[int]
    case_attributes: dict[str, dict[str, str]] = field(default_factory=dict)
    parse_warnings: dict[str, int] = field(default_factory=dict)
    sorted: bool = False

    def __post_init__(self) -> None:
        if len(self.events) != len(self.sequence_index):
            raise ValueError("events and sequence_index lengths differ")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def missing_actor_count(self) -> int:
        return sum(1 for e in self.events if e.actor is None)

    @property
    def case_ids(self) -> list[str]:
        """Distinct case ids in order of first appearance (post-sort order)."""
        seen: dict[str, None] = {}
        for e in self.events:
            seen.setdefault(e.case_id, None)
        return list(seen)

    @property
    def actors(self) -> set[str]:
        return {e.actor for e in self.events if e.actor is not None}

    @property
    def activities(self) -> set[str]:
        return {e.activity for e in self.events}

    def traces(self) -> dict[str, list[int]]:
        """Map case_id -> positions of its events, in canonical order."""
        out: dict[str, list[int]] = {}
        for pos, e in enumerate(self.events):
            out.setdefault(e.case_id, []).append(pos)
        return out


def parse_timestamp(raw: str, timestamp_format: str | None = None) -> datetime:
    """Parse one timestamp string to an aware UTC datetime.

    Default format is RFC 3339 / ISO 8601; a strftime pattern can override.
    Naive values are interpreted as UTC.
    """
    raw = raw.strip()
    if not raw:
        raise ValueError("empty timestamp")
    if timestamp_format is None:
        # datetime.fromisoformat on 3.10 rejects a trailing 'Z'
        if raw.endswith(("Z", "z")):
            raw = raw[:-1] + "+00:00"
        ts = datetime.fromisoformat(raw)
    else:
        ts = datetime.strptime(raw, timestamp_format)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=UTC)
    return ts.astimezone(UTC)


def _as_text_stream(source: str | bytes | IO[bytes] | IO[str]) -> io.TextIOBase:
    if isinstance(source, (str,)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    data = source.read()
    if isinstance(data, bytes):
        return io.StringIO(data.decode("utf-8"))
    return io.StringIO(data)


def _read_bytes(source: str | bytes | IO[bytes]) -> bytes:
    if isinstance(source, str):
        with open(source, "rb") as fh:
            return fh.read()
    if isinstance(source, bytes):
        return source
    data = source.read()
    if isinstance(data, str):
        return data.encode("utf-8")
    return data


def parse_csv(
    source: str | bytes | IO[bytes] | IO[str],
    mapping: Mapping[str, str],
    timestamp_format: str | None = None,
    delimiter: str = ",",
    case_attribute_columns: Sequence[str] = (),
) -> EventLog:
    """Parse a delimited event log.

    ``mapping`` names the source columns for the roles ``case``, ``activity``
    and ``timestamp`` (required) and ``actor`` (optional). Empty actor cells
    yield events with no actor. Any unparseable timestamp aborts the parse;
    the error lists up to the first 10 offending line numbers.
    """
    for role in ("case", "activity", "timestamp"):
        if role not in mapping:
            raise SchemaError(f"column mapping lacks required role {role!r}")

    stream = _as_text_stream(source)
    try:
        reader = csv.DictReader(stream, delimiter=delimiter)
        header = reader.fieldnames
        if header is None:
            raise EmptyLogError("input has no header row")
        wanted = dict(mapping)
        missing = [col for col in wanted.values() if col not in header]
        missing += [col for col in case_attribute_columns if col not in header]
        if missing:
            raise SchemaError(f"mapped columns not in header: {missing}")

        events: list[Event] = []
        case_attrs: dict[str, dict[str, str]] = {}
        bad_rows: list[int] = []
        n_bad = 0
        for row in reader:
            line = reader.line_num
            raw_ts = row[wanted["timestamp"]] or ""
            try:
                ts = parse_timestamp(raw_ts, timestamp_format)
            except (ValueError, TypeError):
                n_bad += 1
                if len(bad_rows) < 10:
                    bad_rows.append(line)
                continue
            case_id = (row[wanted["case"]] or "").strip()
            activity = (row[wanted["activity"]] or "").strip()
            if not case_id or not activity:
                n_bad += 1
                if len(bad_rows) < 10:
                    bad_rows.append(line)
                continue
            actor: str | None = None
            if "actor" in wanted:
                actor = (row[wanted["actor"]] or "").strip() or None
            events.append(Event(case_id, activity, ts, actor))
            if case_attribute_columns and case_id not in case_attrs:
                case_attrs[case_id] = {
                    col: (row[col] or "").strip() for col in case_attribute_columns
                }
        if n_bad:
            raise ParseError(
                f"{n_bad} rows rejected (unparseable timestamp or empty "
                f"case/activity); first offending lines: {bad_rows}"
            )
        if not events:
            raise EmptyLogError("no event rows in input")
        return EventLog(
            events=events,
            sequence_index=list(range(len(events))),
            case_attributes=case_attrs,
        )
    finally:
        stream.close()


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _byte_offset(data: bytes, line: int, column: int) -> int:
    # expat positions are (1-based line, 0-based column)
    lines = data.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def parse_xes(source: str | bytes | IO[bytes]) -> EventLog:
    """Parse a minimal XES log (concept, time and org extensions only).

    Events without a time:timestamp are dropped (counted as rejected); traces
    without a concept:name get a synthesized ``trace_<ordinal>`` case id.
    """
    data = _read_bytes(source)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        offset = _byte_offset(data, line, col)
        raise ParseError(f"malformed XML at byte offset {offset}: {exc}") from exc

    if _strip_ns(root.tag) != "log":
        raise SchemaError(f"root element is <{_strip_ns(root.tag)}>, expected <log>")

    events: list[Event] = []
    case_attrs: dict[str, dict[str, str]] = {}
    unnamed_traces = 0
    rejected_events = 0
    for ordinal, trace in enumerate(el for el in root if _strip_ns(el.tag) == "trace"):
        attrs: dict[str, str] = {}
        trace_events: list[ET.Element] = []
        for child in trace:
            tag = _strip_ns(child.tag)
            if tag == "event":
                trace_events.append(child)
            elif tag in ("string", "boolean", "int", "float", "date"):
                key = child.get("key")
                if key is not None:
                    attrs[key] = child.get("value", "")
        case_id = attrs.get("concept:name", "").strip()
        if not case_id:
            case_id = f"trace_{ordinal}"
            unnamed_traces += 1
        case_attrs[case_id] = attrs
        for ev in trace_events:
            fields: dict[str, str] = {}
            for child in ev:
                key = child.get("key")
                if key is not None:
                    fields[key] = child.get("value", "")
            raw_ts = fields.get("time:timestamp")
            activity = (fields.get("concept:name") or "").strip()
            if raw_ts is None or not activity:
                rejected_events += 1
                continue
            try:
                ts = parse_timestamp(raw_ts)
            except ValueError:
                rejected_events += 1
                continue
            actor = (fields.get("org:resource") or "").strip() or None
            events.append(Event(case_id, activity, ts, actor))

    if not events:
        raise EmptyLogError("XES input contains no usable events")
    return EventLog(
        events=events,
        sequence_index=list(range(len(events))),
        case_attributes=case_attrs,
        parse_warnings={
            "unnamed_traces": unnamed_traces,
            "rejected_events": rejected_events,
        },
    )


def validate_and_sort(log: EventLog) -> EventLog:
    """Return the log in canonical order: stable by (timestamp, file ordinal).

    Idempotent; the result's per-case subsequences are the traces used by all
    downstream analysis. Missing-actor events are kept (they still contribute
    to throughput) and reported via ``missing_actor_count``.
    """
    order = sorted(
        range(len(log.events)),
        key=lambda i: (log.events[i].timestamp, log.sequence_index[i]),
    )
    return EventLog(
        events=[log.events[i] for i in order],
        sequence_index=[log.sequence_index[i] for i in order],
        case_attributes=dict(log.case_attributes),
        parse_warnings=dict(log.parse_warnings),
        sorted=True,
    )


CANONICAL_COLUMNS = ("case", "activity", "timestamp", "actor")


def write_csv(log: EventLog, destination: str | IO[str]) -> None:
    """Write the canonical CSV form (round-trips through :func:`parse_csv`)."""
    attr_cols = sorted({k for attrs in log.case_attributes.values() for k in attrs})
    own = destination if not isinstance(destination, str) else open(
        destination, "w", encoding="utf-8", newline=""
    )
    try:
        writer = csv.writer(own)
        writer.writerow(list(CANONICAL_COLUMNS) + attr_cols)
        for e in log.events:
            attrs = log.case_attributes.get(e.case_id, {})
            writer.writerow(
                [
                    e.case_id,
                    e.activity,
                    e.timestamp.astimezone(UTC).isoformat(),
                    e.actor or "",
                ]
                + [attrs.get(c, "") for c in attr_cols]
            )
    finally:
        if isinstance(destination, str):
            own.close()


def read_canonical_csv(source: str | bytes | IO[bytes] | IO[str]) -> EventLog:
    """Parse a file previously produced by :func:`write_csv`."""
    stream = _as_text_stream(source)
    try:
        header = next(csv.reader(stream), None)
    finally:
        stream.close()
    if header is None:
        raise EmptyLogError("input has no header row")
    attr_cols = [c for c in header if c not in CANONICAL_COLUMNS]
    mapping = {"case": "case", "activity": "activity", "timestamp": "timestamp", "actor": "actor"}
    if isinstance(source, str):
        return validate_and_sort(
            parse_csv(source, mapping, case_attribute_columns=attr_cols)
        )
    if hasattr(source, "seek"):
        source.seek(0)  # type: ignore[union-attr]
    return validate_and_sort(parse_csv(source, mapping, case_attribute_columns=attr_cols))


def events_from_rows(
    rows: Iterable[tuple[str, str, datetime, str | None]],
) -> EventLog:
    """Build a log directly from in-memory tuples (test and synth helper)."""
    events = [Event(c, a, t if t.tzinfo else t.replace(tzinfo=UTC), r) for c, a, t, r in rows]
    return EventLog(events=events, sequence_index=list(range(len(events))))
