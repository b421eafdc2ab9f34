"""Augmented Dickey-Fuller unit-root testing and first-order differencing.

The test regression is the constant-only specification

    dy_t = a + g * y_{t-1} + d_1 dy_{t-1} + ... + d_p dy_{t-p} + u_t

with the augmentation order p chosen by minimizing the Schwarz/Bayesian
information criterion over p = 0..max_lag on a common estimation sample (all
candidates see the same rows, so their criteria are comparable), followed by
a refit at the chosen order on that order's maximal sample. The reported
statistic is the t-ratio of g. The null of a unit root is rejected when the
statistic falls below the response-surface critical value for the constant
case; the surface coefficients are the published finite-sample ones

    crit(level, n) = c0 + c1/n + c2/n^2 + c3/n^3

so the decision adapts to the estimation-sample size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import timedelta

import numpy as np

from .errors import DegenerateSeriesError, InsufficientDataError
from .granger import ols
from .timeseries import DailySeries, Panel

# Response-surface coefficients for the Dickey-Fuller t distribution,
# constant-only regression, one integrated series. Rows: 1%, 5%, 10%.
_CRIT_SURFACE = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}


def critical_values(nobs: int) -> dict[str, float]:
    """Finite-sample critical values for the constant-only ADF statistic."""
    out = {}
    for level, (c0, c1, c2, c3) in _CRIT_SURFACE.items():
        out[level] = c0 + c1 / nobs + c2 / nobs**2 + c3 / nobs**3
    return out


def default_max_lag(n: int) -> int:
    """Schwert's rule: floor(12 * (n/100)^(1/4))."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


@dataclass
class AdfResult:
    statistic: float
    chosen_lag: int
    criterion_value: float
    critical_values: dict[str, float]
    stationary_at_5pct: bool
    nobs: int


def _adf_design(y: np.ndarray, p: int, first_row: int) -> tuple[np.ndarray, np.ndarray]:
    """Response dy_t and regressors [1, y_{t-1}, dy_{t-1..t-p}] for
    t = first_row+1 .. n-1 (indices into y)."""
    dy = np.diff(y)
    t_idx = np.arange(first_row, len(dy))  # dy index k corresponds to t = k+1
    response = dy[t_idx]
    cols = [np.ones(len(t_idx)), y[t_idx]]  # y index t_idx = level at t-1
    for lag in range(1, p + 1):
        cols.append(dy[t_idx - lag])
    return np.column_stack(cols), response


def adf_test(
    series: np.ndarray,
    max_lag: int | None = None,
    regression: str = "c",
) -> AdfResult:
    """ADF unit-root test with BIC-selected augmentation order.

    Only the constant-only regression is supported. Raises
    :class:`DegenerateSeriesError` for constant input and
    :class:`InsufficientDataError` when the series is too short for the lag
    window.
    """
    if regression != "c":
        raise ValueError("only the constant-only regression is supported")
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise ValueError("series must be 1-d")
    if not np.isfinite(y).all():
        raise DegenerateSeriesError("non-finite values in series")
    if np.ptp(y) == 0.0:
        raise DegenerateSeriesError("constant series has no unit-root question")
    n = len(y)
    if max_lag is None:
        max_lag = default_max_lag(n)
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if n < max_lag + 10:
        raise InsufficientDataError(
            f"series length {n} below max_lag + 10 = {max_lag + 10}"
        )

    # lag choice on the common sample: every candidate sees rows t > max_lag
    best: tuple[float, int] | None = None
    nobs_common = n - 1 - max_lag
    for p in range(max_lag + 1):
        design, response = _adf_design(y, p, first_row=max_lag)
        fit = ols(design, response)
        k = design.shape[1]
        sigma2 = fit.ssr / nobs_common
        if sigma2 <= 0:
            bic = -np.inf  # exact fit; prefer the smallest such p
        else:
            bic = nobs_common * math.log(sigma2) + k * math.log(nobs_common)
        if best is None or bic < best[0]:
            best = (bic, p)
    assert best is not None
    best_bic, chosen = best

    design, response = _adf_design(y, chosen, first_row=chosen)
    fit = ols(design, response, covariance=True)
    t_ratio = float(fit.coefficients[1] / fit.standard_errors()[1])
    crit = critical_values(fit.observations_used)
    return AdfResult(
        statistic=t_ratio,
        chosen_lag=chosen,
        criterion_value=float(best_bic),
        critical_values=crit,
        stationary_at_5pct=bool(t_ratio < crit["5%"]),
        nobs=fit.observations_used,
    )


def difference(series: np.ndarray) -> np.ndarray:
    """First difference; output[t] = input[t+1] - input[t]."""
    y = np.asarray(series, dtype=float)
    if len(y) < 2:
        raise InsufficientDataError("differencing needs at least 2 observations")
    return np.diff(y)


@dataclass
class ColumnStationarity:
    adf: AdfResult
    differenced: bool
    still_nonstationary: bool = False


@dataclass
class StationarityReport:
    columns: dict[str, ColumnStationarity] = field(default_factory=dict)
    rows_trimmed: int = 0
    dropped_constant: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_trimmed": self.rows_trimmed,
            "dropped_constant": list(self.dropped_constant),
            "columns": {
                name: {
                    "statistic": c.adf.statistic,
                    "chosen_lag": c.adf.chosen_lag,
                    "criterion_value": c.adf.criterion_value,
                    "critical_values": c.adf.critical_values,
                    "stationary_at_5pct": c.adf.stationary_at_5pct,
                    "nobs": c.adf.nobs,
                    "differenced": c.differenced,
                    "still_nonstationary": c.still_nonstationary,
                }
                for name, c in self.columns.items()
            },
        }


def ensure_stationary(
    panel: Panel,
    alpha: float = 0.05,
    max_lag: int | None = None,
) -> tuple[Panel, StationarityReport]:
    """Difference the panel columns that fail the ADF test.

    When at least one column is differenced, every column loses its first row
    so the daily grid stays aligned. Constant columns carry no information
    and are dropped with a note. A column that still fails after one round of
    differencing is flagged, not iterated.
    """
    if alpha != 0.05:
        raise ValueError("only the 5% decision level is embedded")
    report = StationarityReport()
    if not panel.columns:
        return panel, report

    decisions: dict[str, ColumnStationarity] = {}
    for name, col in panel.columns.items():
        if np.ptp(col.values) == 0.0:
            report.dropped_constant.append(name)
            continue
        result = adf_test(col.values, max_lag=max_lag)
        decisions[name] = ColumnStationarity(adf=result, differenced=not result.stationary_at_5pct)

    any_differenced = any(c.differenced for c in decisions.values())
    report.rows_trimmed = 1 if any_differenced else 0
    report.columns = decisions

    if not any_differenced:
        kept = {n: panel.columns[n] for n in decisions}
        return Panel(start_day=panel.start_day, columns=kept), report

    new_start = panel.start_day + timedelta(days=1)
    new_columns: dict[str, DailySeries] = {}
    for name, decision in decisions.items():
        col = panel.columns[name]
        if decision.differenced:
            values = np.diff(col.values)
            mask = col.mask[1:] | col.mask[:-1]
        else:
            values = col.values[1:].copy()
            mask = col.mask[1:].copy()
        new_columns[name] = replace(col, start_day=new_start, values=values, mask=mask)
        if decision.differenced:
            try:
                retest = adf_test(values, max_lag=max_lag)
                decision.still_nonstationary = not retest.stationary_at_5pct
            except (InsufficientDataError, DegenerateSeriesError):
                decision.still_nonstationary = True
    return Panel(start_day=new_start, columns=new_columns), report
