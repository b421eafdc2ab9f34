"""Daily time-series construction and panel alignment.

Behavioral series count classified transitions per UTC day (bucketed to the
day of the receiving event). KPI series group cases by their start date:
throughput time is the per-day mean duration of completed cases, outcome
series are per-day fractions of cases satisfying a log-specific rule.

All series live on dense daily grids. Days a builder could not observe are
gap-filled (zeros for behavior counts, carry-forward for KPIs) and flagged in
the mask so downstream consumers can tell observed values from synthesized
ones.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import IO, Iterable, Literal, Mapping, Sequence

import numpy as np

from .behavior import BehaviorType, Transition
from .errors import AlignmentError, ConfigError, InsufficientDataError
from .event_log import EventLog

Role = Literal["behavior", "kpi"]

SECONDS_PER_DAY = 86400.0


@dataclass
class DailySeries:
    """A named real-valued series on a contiguous daily grid.

    ``mask[i]`` is True exactly where ``values[i]`` was synthesized by
    gap-filling rather than observed. Unfilled gaps are NaN with mask False.
    """

    name: str
    start_day: date
    values: np.ndarray
    mask: np.ndarray
    role: Role = "kpi"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError("values must be a non-empty 1-d vector")
        if self.values.shape != self.mask.shape:
            raise ValueError("values and mask shapes differ")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_day(self) -> date:
        return self.start_day + timedelta(days=len(self.values) - 1)

    @property
    def fill_fraction(self) -> float:
        return float(self.mask.mean())

    def day(self, offset: int) -> date:
        return self.start_day + timedelta(days=offset)

    def slice(self, start: date, end: date) -> "DailySeries":
        """Restrict to [start, end] (inclusive); range must be covered."""
        lo = (start - self.start_day).days
        hi = (end - self.start_day).days + 1
        if lo < 0 or hi > len(self.values):
            raise ValueError(f"slice [{start}, {end}] outside series {self.name}")
        return replace(self, start_day=start, values=self.values[lo:hi].copy(), mask=self.mask[lo:hi].copy())


def _fill_gaps(values: np.ndarray, role: Role) -> tuple[np.ndarray, np.ndarray]:
    """Fill NaN gaps; return (filled values, synthesized-position mask)."""
    values = np.asarray(values, dtype=float)
    mask = np.isnan(values)
    if not mask.any():
        return values.copy(), mask
    filled = values.copy()
    if role == "behavior":
        filled[mask] = 0.0
        return filled, mask
    # KPI: last observation carried forward, initial gap back-filled
    if mask.all():
        raise InsufficientDataError("cannot gap-fill an entirely empty KPI series")
    last = math.nan
    for i in range(len(filled)):
        if mask[i]:
            filled[i] = last
        else:
            last = filled[i]
    first_obs = int(np.flatnonzero(~mask)[0])
    filled[:first_obs] = filled[first_obs]
    return filled, mask


def series_from_day_values(
    name: str, day_values: Mapping[date, float], role: Role
) -> DailySeries:
    """Build a dense series from sparse day -> value observations."""
    if not day_values:
        raise InsufficientDataError(f"no observations for series {name!r}")
    days = sorted(day_values)
    start, end = days[0], days[-1]
    n = (end - start).days + 1
    raw = np.full(n, np.nan)
    for d, v in day_values.items():
        raw[(d - start).days] = v
    values, mask = _fill_gaps(raw, role)
    return DailySeries(name=name, start_day=start, values=values, mask=mask, role=role)


Granularity = Literal["global", "per_actor", "per_activity"]


def behavior_series(
    transitions: Sequence[Transition],
    granularity: Granularity = "global",
    top_k: int | None = 10,
) -> list[DailySeries]:
    """Daily counts of each behavior type, optionally split per group.

    Per-actor series are keyed by the actor initiating the transition (the
    one handing work over); per-activity series by the receiving event's
    activity. Groups beyond the ``top_k`` most frequent are dropped; pass
    ``top_k=None`` to keep all groups (the per-group series then partition
    the global counts exactly). Days without transitions count as observed
    zeros, not gaps.
    """
    if not transitions:
        if granularity == "global":
            raise InsufficientDataError("no transitions to aggregate")
        return []
    days = [t.to_timestamp.date() for t in transitions]
    start, end = min(days), max(days)
    n = (end - start).days + 1

    def group_of(t: Transition) -> str:
        if granularity == "global":
            return ""
        if granularity == "per_actor":
            return t.from_actor
        if t.to_activity is None:
            raise ValueError(
                "per_activity granularity needs transitions carrying activities; "
                "reclassify the log in-process"
            )
        return t.to_activity

    tag = "actor" if granularity == "per_actor" else "activity"
    groups: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for t, d in zip(transitions, days):
        g = group_of(t)
        key = t.behavior.value if g == "" else f"{t.behavior.value}@{tag}={g}"
        arr = groups.get(key)
        if arr is None:
            arr = np.zeros(n)
            groups[key] = arr
        arr[(d - start).days] += 1.0
        if g != "":
            counts[g] = counts.get(g, 0) + 1

    if granularity != "global" and top_k is not None:
        keep = {g for g, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]}
        groups = {k: v for k, v in groups.items() if k.split(f"@{tag}=", 1)[1] in keep}

    mask = np.zeros(n, dtype=bool)
    return [
        DailySeries(name=k, start_day=start, values=v, mask=mask.copy(), role="behavior")
        for k, v in sorted(groups.items())
    ]


def completed_cases(
    log: EventLog,
    min_quiet_days: float = 1.0,
    end_activities: Sequence[str] | None = None,
) -> dict[str, tuple[int, int]]:
    """Map case_id -> (first event pos, last event pos) for completed cases.

    Without an explicit end-activity list a case counts as complete when its
    last event precedes the log's final timestamp by at least
    ``min_quiet_days``, which excludes right-truncated cases.
    """
    if not log.events:
        return {}
    bounds: dict[str, tuple[int, int]] = {}
    for pos, e in enumerate(log.events):
        first, _ = bounds.get(e.case_id, (pos, pos))
        bounds[e.case_id] = (first, pos)
    if end_activities is not None:
        ends = set(end_activities)
        return {
            c: (f, l) for c, (f, l) in bounds.items() if log.events[l].activity in ends
        }
    horizon = max(e.timestamp for e in log.events)
    cutoff = horizon - timedelta(days=min_quiet_days)
    return {c: (f, l) for c, (f, l) in bounds.items() if log.events[l].timestamp <= cutoff}


def throughput_series(
    log: EventLog,
    min_quiet_days: float = 1.0,
    end_activities: Sequence[str] | None = None,
    name: str = "TT",
) -> DailySeries:
    """Daily mean throughput time (fractional days) of completed cases,
    grouped by case start date."""
    complete = completed_cases(log, min_quiet_days, end_activities)
    if not complete:
        raise InsufficientDataError("no completed cases for throughput series")
    sums: dict[date, float] = {}
    ns: dict[date, int] = {}
    for first, last in complete.values():
        start_e, end_e = log.events[first], log.events[last]
        tt = (end_e.timestamp - start_e.timestamp).total_seconds() / SECONDS_PER_DAY
        d = start_e.timestamp.date()
        sums[d] = sums.get(d, 0.0) + tt
        ns[d] = ns.get(d, 0) + 1
    means = {d: sums[d] / ns[d] for d in sums}
    return series_from_day_values(name, means, role="kpi")


@dataclass(frozen=True)
class KeywordRule:
    """Case satisfies the rule if any activity label contains any keyword
    (case-insensitive)."""

    keywords: tuple[str, ...]

    def case_matches(self, activities: Sequence[str], attrs: Mapping[str, str]) -> bool:
        lowered = [k.lower() for k in self.keywords]
        return any(k in a.lower() for a in activities for k in lowered)


@dataclass(frozen=True)
class LastEventRule:
    """Case satisfies the rule if its final event's label starts with the
    given prefix."""

    prefix: str

    def case_matches(self, activities: Sequence[str], attrs: Mapping[str, str]) -> bool:
        return bool(activities) and activities[-1].startswith(self.prefix)


@dataclass(frozen=True)
class AttributeRule:
    """Case satisfies the rule if a boolean case attribute is truthy."""

    attribute: str
    true_values: tuple[str, ...] = ("true", "1", "yes", "y")

    def case_matches(self, activities: Sequence[str], attrs: Mapping[str, str]) -> bool:
        return attrs.get(self.attribute, "").strip().lower() in self.true_values


OutcomeRule = KeywordRule | LastEventRule | AttributeRule


def outcome_series(log: EventLog, rule: OutcomeRule, name: str = "outcome") -> DailySeries:
    """Per-day fraction of cases starting that day that satisfy the rule."""
    if not log.events:
        raise InsufficientDataError("empty log")
    if isinstance(rule, AttributeRule):
        if not any(rule.attribute in attrs for attrs in log.case_attributes.values()):
            raise ConfigError(
                f"outcome attribute {rule.attribute!r} not present on any case"
            )
    case_activities: dict[str, list[str]] = {}
    case_start: dict[str, date] = {}
    for e in log.events:
        case_activities.setdefault(e.case_id, []).append(e.activity)
        case_start.setdefault(e.case_id, e.timestamp.date())
    hits: dict[date, int] = {}
    totals: dict[date, int] = {}
    for case_id, activities in case_activities.items():
        d = case_start[case_id]
        attrs = log.case_attributes.get(case_id, {})
        totals[d] = totals.get(d, 0) + 1
        if rule.case_matches(activities, attrs):
            hits[d] = hits.get(d, 0) + 1
    fractions = {d: hits.get(d, 0) / totals[d] for d in totals}
    return series_from_day_values(name, fractions, role="kpi")


@dataclass
class Panel:
    """Named daily series aligned on one shared calendar."""

    start_day: date
    columns: dict[str, DailySeries] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, s in self.columns.items():
            if s.start_day != self.start_day:
                raise ValueError(f"column {name} not aligned to panel start day")
        lengths = {len(s) for s in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def roles(self) -> dict[str, Role]:
        return {name: s.role for name, s in self.columns.items()}

    def columns_with_role(self, role: Role) -> list[str]:
        return [name for name, s in self.columns.items() if s.role == role]

    def values(self, name: str) -> np.ndarray:
        return self.columns[name].values

    @property
    def fill_fractions(self) -> dict[str, float]:
        return {name: s.fill_fraction for name, s in self.columns.items()}

    def days(self) -> list[date]:
        return [self.start_day + timedelta(days=i) for i in range(len(self))]


def align(series: Iterable[DailySeries], max_kpi_fill: float = 0.5) -> Panel:
    """Clip all series to their common date window and assemble a panel.

    Remaining NaN gaps inside the window are filled per role (zeros for
    behavior, carry-forward for KPI) and masked. A KPI column with more than
    ``max_kpi_fill`` of its window synthesized is rejected outright.
    """
    series = list(series)
    if len(series) < 2:
        raise AlignmentError("alignment needs at least two series")
    names = [s.name for s in series]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate series names: {names}")
    start = max(s.start_day for s in series)
    end = min(s.end_day for s in series)
    if start > end:
        raise AlignmentError(
            f"series date ranges do not overlap (window [{start}, {end}])"
        )
    columns: dict[str, DailySeries] = {}
    for s in series:
        clipped = s.slice(start, end)
        if np.isnan(clipped.values).any():
            filled, gap_mask = _fill_gaps(clipped.values, clipped.role)
            clipped = replace(clipped, values=filled, mask=clipped.mask | gap_mask)
        if clipped.role == "kpi" and clipped.fill_fraction > max_kpi_fill:
            raise InsufficientDataError(
                f"KPI column {s.name!r} has {clipped.fill_fraction:.0%} synthesized "
                f"days (limit {max_kpi_fill:.0%})"
            )
        columns[s.name] = clipped
    return Panel(start_day=start, columns=columns)


def write_panel(panel: Panel, csv_dest: str | IO[str], masks_dest: str | IO[str]) -> None:
    """Write a panel as CSV plus a JSON sidecar with roles and masks."""
    own_csv = csv_dest if not isinstance(csv_dest, str) else open(
        csv_dest, "w", encoding="utf-8", newline=""
    )
    try:
        writer = csv.writer(own_csv)
        writer.writerow(["date"] + panel.names)
        for i, d in enumerate(panel.days()):
            writer.writerow([d.isoformat()] + [repr(float(panel.values(n)[i])) for n in panel.names])
    finally:
        if isinstance(csv_dest, str):
            own_csv.close()
    sidecar = {
        "start_day": panel.start_day.isoformat(),
        "columns": {
            name: {"role": s.role, "mask": [int(v) for v in s.mask]}
            for name, s in panel.columns.items()
        },
    }
    own_json = masks_dest if not isinstance(masks_dest, str) else open(
        masks_dest, "w", encoding="utf-8"
    )
    try:
        json.dump(sidecar, own_json, indent=2, sort_keys=True)
    finally:
        if isinstance(masks_dest, str):
            own_json.close()


def read_panel(csv_source: str | IO[str], masks_source: str | IO[str]) -> Panel:
    own_csv = csv_source if not isinstance(csv_source, str) else open(
        csv_source, "r", encoding="utf-8", newline=""
    )
    try:
        reader = csv.reader(own_csv)
        header = next(reader)
        names = header[1:]
        days: list[date] = []
        rows: list[list[float]] = []
        for row in reader:
            days.append(date.fromisoformat(row[0]))
            rows.append([float(v) for v in row[1:]])
    finally:
        if isinstance(csv_source, str):
            own_csv.close()
    own_json = masks_source if not isinstance(masks_source, str) else open(
        masks_source, "r", encoding="utf-8"
    )
    try:
        sidecar = json.load(own_json)
    finally:
        if isinstance(masks_source, str):
            own_json.close()
    if not rows:
        raise InsufficientDataError("panel CSV has no rows")
    start = days[0]
    data = np.asarray(rows)
    columns: dict[str, DailySeries] = {}
    for j, name in enumerate(names):
        meta = sidecar["columns"][name]
        columns[name] = DailySeries(
            name=name,
            start_day=start,
            values=data[:, j],
            mask=np.asarray(meta["mask"], dtype=bool),
            role=meta["role"],
        )
    return Panel(start_day=start, columns=columns)
