"""Lag selection through a sparse group lasso over a lag-structured design.

For one KPI target, the design stacks every behavior column at lags 1..M,
one contiguous group of columns per lag. The solver minimizes

    (1/2n) ||y - X b||^2 + lambda_g * sum_g sqrt(p_g) ||b_g||_2
                         + lambda_1 * ||b||_1

by block coordinate descent with group soft-thresholding: a group is zeroed
outright when its soft-thresholded gradient falls inside the group penalty
ball, otherwise the group block is solved by proximal gradient steps. A lag
counts as selected in a run when any coefficient in its group survives;
frequencies are aggregated over the whole (lambda_g, lambda_1, target) grid
and the most frequently active lags become the Granger candidates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSeriesError,
    InsufficientDataError,
    NumericError,
    SelectionError,
)
from .timeseries import Panel


@dataclass(frozen=True)
class LassoConfig:
    max_lag: int = 22
    lambda_group_grid: tuple[float, ...] = (0.01, 0.1, 0.5, 1.0, 5.0, 10.0)
    lambda_l1_grid: tuple[float, ...] = (0.0, 0.01, 0.1, 0.5, 1.0)
    tolerance: float = 1e-6
    max_iterations: int = 10000
    active_threshold: float = 1e-6
    top_k: int = 5

    def __post_init__(self) -> None:
        if self.max_lag < 1:
            raise ConfigError("max_lag must be >= 1")
        if any(l < 0 for l in self.lambda_group_grid + self.lambda_l1_grid):
            raise ConfigError("lambda values must be >= 0")


@dataclass
class DesignMatrix:
    """Standardized lag design for one target column."""

    target: str
    response: np.ndarray
    predictors: np.ndarray
    group_index: np.ndarray  # lag label per predictor column
    column_names: list[str]
    lags: list[int]
    means: np.ndarray
    scales: np.ndarray
    dropped_constant: list[str] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.response)

    def group_columns(self, lag: int) -> np.ndarray:
        return np.flatnonzero(self.group_index == lag)


def build_design(panel: Panel, target: str, max_lag: int) -> DesignMatrix:
    """Row t holds every behavior column at lags 1..max_lag; the response is
    the target at t. All columns are standardized; constants are dropped."""
    if target not in panel.columns:
        raise ConfigError(f"unknown target column {target!r}")
    if panel.columns[target].role != "kpi":
        raise ConfigError(f"target {target!r} is not a KPI column")
    n = len(panel)
    if n <= max_lag + 10:
        raise InsufficientDataError(
            f"panel length {n} too short for max_lag {max_lag}"
        )
    behaviors = sorted(panel.columns_with_role("behavior"))
    if not behaviors:
        raise InsufficientDataError("panel has no behavior columns")

    rows = n - max_lag
    y = panel.values(target)[max_lag:].astype(float)
    y_scale = float(y.std())
    if y_scale == 0.0:
        raise DegenerateSeriesError(f"target {target!r} is constant over the design rows")
    response = (y - y.mean()) / y_scale

    cols: list[np.ndarray] = []
    names: list[str] = []
    groups: list[int] = []
    dropped: list[str] = []
    means: list[float] = []
    scales: list[float] = []
    for lag in range(1, max_lag + 1):
        for name in behaviors:
            v = panel.values(name)
            col = v[max_lag - lag : n - lag].astype(float)
            mu, sd = float(col.mean()), float(col.std())
            label = f"{name}[l-{lag}]"
            if sd == 0.0:
                dropped.append(label)
                continue
            cols.append((col - mu) / sd)
            names.append(label)
            groups.append(lag)
            means.append(mu)
            scales.append(sd)
    if not cols:
        raise DegenerateSeriesError("all predictor columns are constant")
    predictors = np.column_stack(cols)
    assert predictors.shape == (rows, len(names))
    return DesignMatrix(
        target=target,
        response=response,
        predictors=predictors,
        group_index=np.asarray(groups),
        column_names=names,
        lags=sorted(set(groups)),
        means=np.asarray(means),
        scales=np.asarray(scales),
        dropped_constant=dropped,
    )


def _soft(v: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


@dataclass
class SglResult:
    coefficients: np.ndarray
    converged: bool
    sweeps: int
    objective_path: list[float]

    @property
    def objective(self) -> float:
        return self.objective_path[-1]


def _objective(
    x: np.ndarray,
    y: np.ndarray,
    beta: np.ndarray,
    groups: list[np.ndarray],
    lambda_group: float,
    lambda_l1: float,
) -> float:
    resid = y - x @ beta
    value = 0.5 * float(resid @ resid) / len(y)
    for idx in groups:
        value += lambda_group * math.sqrt(len(idx)) * float(np.linalg.norm(beta[idx]))
    value += lambda_l1 * float(np.abs(beta).sum())
    return value


def sparse_group_lasso(
    design: DesignMatrix,
    lambda_group: float,
    lambda_l1: float,
    tolerance: float = 1e-6,
    max_iterations: int = 10000,
) -> SglResult:
    """Block coordinate descent for the sparse group lasso objective.

    Convergence is declared when the largest coefficient change over a full
    sweep drops below ``tolerance``; hitting ``max_iterations`` sweeps is
    reported through ``converged=False``. The per-sweep objective is tracked
    and checked to be non-increasing.
    """
    x = design.predictors
    y = design.response
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise NumericError("non-finite values in design")
    n, k = x.shape
    group_idx = [design.group_columns(lag) for lag in design.lags]
    # per-group Lipschitz constants of the smooth part's block gradient
    lipschitz = []
    for idx in group_idx:
        xg = x[:, idx]
        s = np.linalg.svd(xg, compute_uv=False)[0] if idx.size else 0.0
        lipschitz.append(max(s * s / n, 1e-12))

    beta = np.zeros(k)
    resid = y.copy()
    objective_path = [_objective(x, y, beta, group_idx, lambda_group, lambda_l1)]
    converged = False
    sweeps = 0
    inner_tol = min(tolerance, 1e-6) * 0.1
    for sweeps in range(1, max_iterations + 1):
        max_change = 0.0
        for gi, idx in enumerate(group_idx):
            xg = x[:, idx]
            old = beta[idx].copy()
            partial = resid + xg @ old  # residual with this group removed
            weight = lambda_group * math.sqrt(idx.size)
            grad0 = xg.T @ partial / n
            if np.linalg.norm(_soft(grad0, lambda_l1)) <= weight:
                new = np.zeros(idx.size)
            else:
                lc = lipschitz[gi]
                new = old.copy()
                for _ in range(200):
                    grad = xg.T @ (xg @ new - partial) / n
                    z = _soft(new - grad / lc, lambda_l1 / lc)
                    z_norm = np.linalg.norm(z)
                    if z_norm > 0:
                        z *= max(0.0, 1.0 - weight / (lc * z_norm))
                    step = float(np.max(np.abs(z - new)))
                    new = z
                    if step < inner_tol:
                        break
            delta = new - old
            change = float(np.max(np.abs(delta))) if delta.size else 0.0
            if change > 0:
                resid -= xg @ delta
                beta[idx] = new
            max_change = max(max_change, change)
        objective_path.append(
            _objective(x, y, beta, group_idx, lambda_group, lambda_l1)
        )
        if objective_path[-1] > objective_path[-2] + 1e-10 * (1.0 + abs(objective_path[-2])):
            raise NumericError(
                f"objective increased across sweep {sweeps}: "
                f"{objective_path[-2]} -> {objective_path[-1]}"
            )
        if max_change < tolerance:
            converged = True
            break
    return SglResult(
        coefficients=beta,
        converged=converged,
        sweeps=sweeps,
        objective_path=objective_path,
    )


def kkt_residual(
    design: DesignMatrix,
    coefficients: np.ndarray,
    lambda_group: float,
    lambda_l1: float,
) -> float:
    """Largest violation of the subgradient optimality conditions."""
    x = design.predictors
    y = design.response
    n = x.shape[0]
    resid = y - x @ coefficients
    worst = 0.0
    for lag in design.lags:
        idx = design.group_columns(lag)
        grad = -x[:, idx].T @ resid / n
        beta_g = coefficients[idx]
        weight = lambda_group * math.sqrt(idx.size)
        norm = float(np.linalg.norm(beta_g))
        if norm == 0.0:
            slack = float(np.linalg.norm(_soft(-grad, lambda_l1))) - weight
            worst = max(worst, max(0.0, slack))
            continue
        for j in range(idx.size):
            g_j = grad[j] + weight * beta_g[j] / norm
            if beta_g[j] != 0.0:
                worst = max(worst, abs(g_j + lambda_l1 * math.copysign(1.0, beta_g[j])))
            else:
                worst = max(worst, max(0.0, abs(g_j) - lambda_l1))
    return worst


@dataclass
class LagSelection:
    frequency: dict[int, int]
    selected: list[int]
    runs: int
    max_lag: int

    def to_dict(self) -> dict:
        return {
            "max_lag": self.max_lag,
            "runs": self.runs,
            "frequency": {str(lag): count for lag, count in sorted(self.frequency.items())},
            "selected": list(self.selected),
        }


def active_lags(design: DesignMatrix, coefficients: np.ndarray, threshold: float) -> set[int]:
    out = set()
    for lag in design.lags:
        idx = design.group_columns(lag)
        if np.any(np.abs(coefficients[idx]) > threshold):
            out.add(lag)
    return out


def lag_frequency(
    panel: Panel,
    targets: Sequence[str],
    config: LassoConfig = LassoConfig(),
    workers: int = 1,
) -> LagSelection:
    """Count how often each lag's group is active across the full
    (lambda_g, lambda_1, target) grid and return the top-k lags.

    Ties break toward the smaller lag. Frequencies are summed over all
    targets, giving one histogram per dataset.
    """
    if not targets:
        raise ConfigError("at least one target column is required")
    designs = {t: build_design(panel, t, config.max_lag) for t in targets}
    grid = [
        (t, lg, l1)
        for t in targets
        for lg in config.lambda_group_grid
        for l1 in config.lambda_l1_grid
    ]

    def run(task: tuple[str, float, float]) -> set[int]:
        target, lg, l1 = task
        fit = sparse_group_lasso(
            designs[target], lg, l1,
            tolerance=config.tolerance,
            max_iterations=config.max_iterations,
        )
        return active_lags(designs[target], fit.coefficients, config.active_threshold)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_run = list(pool.map(run, grid))
    else:
        per_run = [run(task) for task in grid]

    frequency: dict[int, int] = {}
    for lags in per_run:
        for lag in lags:
            frequency[lag] = frequency.get(lag, 0) + 1
    if not frequency:
        raise SelectionError(
            "no lag group was active in any run; widen or lower the lambda grids"
        )
    ranked = sorted(frequency.items(), key=lambda kv: (-kv[1], kv[0]))
    selected = [lag for lag, _ in ranked[: config.top_k]]
    return LagSelection(
        frequency=frequency,
        selected=selected,
        runs=len(grid),
        max_lag=config.max_lag,
    )
