"""Synthetic event logs and VAR panels with known ground truth.

The log generator is built so classification outcomes are controlled, not
emergent accidents: each actor executes maximal same-actor segments of a case
atomically, so same-actor pairs are continuations unless an interruption is
injected explicitly (a single-event background case by the same actor placed
strictly inside the pair's gap). Handovers follow a per-transition Bernoulli
draw; whether the receiving actor was busy in the gap falls out of the
schedule. A planted (behavior, lag, beta) triple inflates case durations via
an actorless closing event, which stretches throughput time without touching
any classification decision.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np

from .behavior import BehaviorType, classify_log
from .errors import ConfigError, NumericError
from .event_log import EventLog, events_from_rows, validate_and_sort, UTC
from .timeseries import DailySeries, Panel

_BASE = datetime(2020, 1, 1, tzinfo=UTC)

MEAN_CASE_LENGTH = 6.0  # geometric event count per case
MEAN_GAP_DAYS = 0.2  # exponential inter-event gap


@dataclass(frozen=True)
class PlantedEffect:
    behavior: BehaviorType
    lag: int
    beta: float  # extra days of duration per behavior occurrence


@dataclass(frozen=True)
class SynthLogConfig:
    n_cases: int = 500
    n_actors: int = 8
    n_activities: int = 8
    days: int = 200
    handover_rate: float = 0.3
    interruption_rate: float = 0.1
    planted: PlantedEffect | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.n_cases < 1 or self.n_actors < 1 or self.n_activities < 1:
            raise ConfigError("counts must be positive")
        if self.days < 2:
            raise ConfigError("horizon must span at least 2 days")
        for name in ("handover_rate", "interruption_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {v}")
        if self.handover_rate > 0 and self.n_actors < 2:
            raise ConfigError("handovers need at least 2 actors")
        if self.planted is not None and not 1 <= self.planted.lag < self.days:
            raise ConfigError("planted lag must lie inside the horizon")


def _dt(day_offset: float) -> datetime:
    return _BASE + timedelta(days=float(day_offset))


def generate_log(config: SynthLogConfig) -> EventLog:
    """Deterministic synthetic event log for the given seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    n = config.n_cases
    lengths = rng.geometric(1.0 / MEAN_CASE_LENGTH, size=n)
    ready0 = np.sort(rng.uniform(0.0, config.days, size=n))
    activities = [f"act_{i}" for i in range(config.n_activities)]

    # per-case plan: actor chain, inter-event gaps, interruption flags
    cases: list[dict] = []
    for idx in range(n):
        length = int(lengths[idx])
        chain = [int(rng.integers(config.n_actors))]
        for _ in range(length - 1):
            if config.n_actors > 1 and rng.random() < config.handover_rate:
                nxt = int(rng.integers(config.n_actors - 1))
                if nxt >= chain[-1]:
                    nxt += 1
                chain.append(nxt)
            else:
                chain.append(chain[-1])
        gaps = rng.exponential(MEAN_GAP_DAYS, size=max(length - 1, 0))
        interrupt = [
            chain[k] == chain[k + 1] and rng.random() < config.interruption_rate
            for k in range(length - 1)
        ]
        acts = [activities[int(a)] for a in rng.integers(config.n_activities, size=length)]
        # split into maximal same-actor runs: (actor, event slice bounds)
        runs: list[tuple[int, int, int]] = []
        start = 0
        for k in range(1, length):
            if chain[k] != chain[k - 1]:
                runs.append((chain[start], start, k))
                start = k
        runs.append((chain[start], start, length))
        cases.append(
            {
                "ready": float(ready0[idx]),
                "gaps": gaps,
                "interrupt": interrupt,
                "acts": acts,
                "runs": runs,
                "times": np.empty(length),
            }
        )

    # event-driven schedule: runs execute atomically per actor, so an actor
    # never interleaves two cases inside a same-actor pair's gap
    actor_free = np.zeros(config.n_actors)
    queue: list[tuple[float, int, int, int]] = []
    for ci, case in enumerate(cases):
        heapq.heappush(queue, (case["ready"], ci, ci, 0))
    tie = n
    jitter_scale = 1.0 / 86400.0  # about a second, keeps timestamps distinct
    while queue:
        ready, _, ci, ri = heapq.heappop(queue)
        case = cases[ci]
        actor, lo, hi = case["runs"][ri]
        t = max(ready, actor_free[actor]) + rng.uniform(0.5, 1.5) * jitter_scale
        for k in range(lo, hi):
            case["times"][k] = t
            if k + 1 < hi:
                t += case["gaps"][k]
        actor_free[actor] = t
        if ri + 1 < len(case["runs"]):
            next_ready = t + case["gaps"][hi - 1]
            tie += 1
            heapq.heappush(queue, (next_ready, tie, ci, ri + 1))

    rows: list[tuple[str, str, datetime, str | None]] = []
    width = len(str(n))
    bg = 0
    for ci, case in enumerate(cases):
        case_id = f"case_{ci:0{width}d}"
        chain_times = case["times"]
        for k, act in enumerate(case["acts"]):
            actor_id = None
            for actor, lo, hi in case["runs"]:
                if lo <= k < hi:
                    actor_id = actor
                    break
            rows.append((case_id, act, _dt(chain_times[k]), f"actor_{actor_id}"))
        for k, flagged in enumerate(case["interrupt"]):
            if not flagged:
                continue
            t_lo, t_hi = chain_times[k], chain_times[k + 1]
            if t_hi <= t_lo:
                continue
            inside = t_lo + rng.uniform(0.25, 0.75) * (t_hi - t_lo)
            actor = None
            for a, lo, hi in case["runs"]:
                if lo <= k < hi:
                    actor = a
                    break
            rows.append(
                (
                    f"bg_{bg:06d}",
                    activities[int(rng.integers(config.n_activities))],
                    _dt(inside),
                    f"actor_{actor}",
                )
            )
            bg += 1

    log = validate_and_sort(events_from_rows(rows))
    if config.planted is None:
        return log

    # inflate case durations from the planted behavior's daily counts using
    # an actorless closing event: throughput stretches, classification stays
    # bit-identical because pairs with a missing actor are never classified
    planted = config.planted
    counts: dict[date, int] = {}
    for t in classify_log(log).transitions:
        if t.behavior == planted.behavior:
            d = t.to_timestamp.date()
            counts[d] = counts.get(d, 0) + 1
    case_last: dict[str, datetime] = {}
    case_first: dict[str, datetime] = {}
    for e in log.events:
        case_first.setdefault(e.case_id, e.timestamp)
        case_last[e.case_id] = e.timestamp
    extra: list[tuple[str, str, datetime, str | None]] = []
    for case_id, first_ts in case_first.items():
        if case_id.startswith("bg_"):
            continue
        lag_day = first_ts.date() - timedelta(days=planted.lag)
        count = counts.get(lag_day, 0)
        if count <= 0:
            continue
        delay = planted.beta * count
        extra.append(
            (case_id, "case_closed", case_last[case_id] + timedelta(days=delay), None)
        )
    if extra:
        log = validate_and_sort(events_from_rows(rows + extra))
    return log


def generate_var(
    dimensions: int,
    length: int,
    coefficients: dict[tuple[int, int, int], float] | None = None,
    noise_scale: float = 1.0,
    seed: int = 0,
    kpi_columns: int = 1,
    burn_in: int = 200,
    start_day: date = date(2020, 1, 1),
) -> Panel:
    """Simulate a VAR with Gaussian innovations and return it as a panel.

    ``coefficients`` maps (target_dim, source_dim, lag) to the coefficient;
    omitted entries are zero. The last ``kpi_columns`` dimensions are labeled
    y0, y1, ... with role kpi; the rest x0, x1, ... with role behavior. The
    companion-matrix spectral radius is checked before simulating.
    """
    if dimensions < 1 or length < 1:
        raise ConfigError("dimensions and length must be positive")
    if not 0 <= kpi_columns <= dimensions:
        raise ConfigError("kpi_columns out of range")
    coefficients = dict(coefficients or {})
    max_lag = max((lag for (_, _, lag) in coefficients), default=0)
    for (ti, si, lag) in coefficients:
        if not (0 <= ti < dimensions and 0 <= si < dimensions and lag >= 1):
            raise ConfigError(f"bad coefficient key {(ti, si, lag)}")

    if max_lag > 0:
        mats = [np.zeros((dimensions, dimensions)) for _ in range(max_lag)]
        for (ti, si, lag), value in coefficients.items():
            mats[lag - 1][ti, si] = value
        size = dimensions * max_lag
        companion = np.zeros((size, size))
        companion[:dimensions] = np.hstack(mats)
        if max_lag > 1:
            companion[dimensions:, : dimensions * (max_lag - 1)] = np.eye(
                dimensions * (max_lag - 1)
            )
        radius = float(np.max(np.abs(np.linalg.eigvals(companion))))
        if radius >= 1.0:
            raise NumericError(
                f"explosive coefficient map: companion spectral radius {radius:.3f}"
            )

    rng = np.random.default_rng(seed)
    total = length + burn_in + max_lag
    data = np.zeros((total, dimensions))
    noise = rng.standard_normal((total, dimensions)) * noise_scale
    data[:max_lag] = noise[:max_lag]
    for t in range(max_lag, total):
        data[t] = noise[t]
        for (ti, si, lag), value in coefficients.items():
            data[t, ti] += value * data[t - lag, si]
    data = data[burn_in + max_lag :]

    names = [f"x{i}" for i in range(dimensions - kpi_columns)] + [
        f"y{i}" for i in range(kpi_columns)
    ]
    mask = np.zeros(length, dtype=bool)
    columns = {
        name: DailySeries(
            name=name,
            start_day=start_day,
            values=data[:, j].copy(),
            mask=mask.copy(),
            role="behavior" if j < dimensions - kpi_columns else "kpi",
        )
        for j, name in enumerate(names)
    }
    return Panel(start_day=start_day, columns=columns)
