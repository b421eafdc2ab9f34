"""Pairwise Granger causality via nested autoregressions and an SSR F-test.

For a candidate driver x and target y at model order L, the univariate model
regresses y_t on its own L lagged values and the bivariate model adds the L
lagged values of x. Both are fitted on the identical estimation sample (the
first L rows are dropped), with the intercept absorbed by demeaning response
and regressors, so the residual degrees of freedom of the bivariate fit are
n_used - 2L - 1 with n_used = T - L observations actually regressed. The
F statistic

    F = ((SSR_uni - SSR_biv) / L) / (SSR_biv / (n_used - 2L - 1))

is referred to the F distribution upper tail, evaluated through the
regularized incomplete beta function. The reverse-direction p-value (y -> x)
is computed alongside to support the one-directionality analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.special import betainc

from .errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    SingularDesignError,
)
from .timeseries import Panel


@dataclass
class ArFit:
    """Least-squares fit summary for one (auto)regression."""

    coefficients: np.ndarray
    ssr: float
    observations_used: int
    lag_order: int = 0
    xtx_inverse: np.ndarray | None = None  # unscaled parameter covariance

    def standard_errors(self) -> np.ndarray:
        if self.xtx_inverse is None:
            raise ValueError("fit was computed without covariance")
        k = len(self.coefficients)
        sigma2 = self.ssr / (self.observations_used - k)
        return np.sqrt(sigma2 * np.diag(self.xtx_inverse))


def ols(
    design: np.ndarray,
    response: np.ndarray,
    column_names: Sequence[str] | None = None,
    lag_order: int = 0,
    covariance: bool = False,
) -> ArFit:
    """Least squares through a pivoted QR decomposition.

    Raises :class:`SingularDesignError` naming the dependent columns when the
    design is rank deficient instead of silently returning a minimum-norm
    solution. With ``covariance=True`` the inverse Gram matrix (X'X)^-1 is
    attached for standard errors.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise ValueError("design must be 2-d")
    n, k = X.shape
    if n <= k:
        raise InsufficientDataError(f"{n} rows for {k} coefficients")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DegenerateSeriesError("non-finite values in regression input")

    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 0.0
    tol = max(n, k) * np.finfo(float).eps * scale
    rank = int((diag > tol).sum())
    if rank < k:
        dependent = sorted(piv[rank:].tolist())
        names = (
            [column_names[i] for i in dependent]
            if column_names is not None
            else dependent
        )
        raise SingularDesignError(f"rank-deficient design; dependent columns: {names}")

    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_piv
    resid = y - X @ beta
    xtx_inv = None
    if covariance:
        r_inv = scipy.linalg.solve_triangular(r, np.eye(k))
        cov_piv = r_inv @ r_inv.T
        xtx_inv = np.empty((k, k))
        xtx_inv[np.ix_(piv, piv)] = cov_piv
    return ArFit(
        coefficients=beta,
        ssr=float(resid @ resid),
        observations_used=n,
        lag_order=lag_order,
        xtx_inverse=xtx_inv,
    )


def f_survival(f: float, dof_num: int, dof_den: int) -> float:
    """Upper-tail probability of the F(dof_num, dof_den) distribution."""
    if dof_num <= 0 or dof_den <= 0:
        raise ValueError("degrees of freedom must be positive")
    if not np.isfinite(f):
        return 0.0 if f > 0 else 1.0
    if f <= 0:
        return 1.0
    x = dof_den / (dof_den + dof_num * f)
    return float(betainc(dof_den / 2.0, dof_num / 2.0, x))


def lag_matrix(series: np.ndarray, lag_order: int) -> np.ndarray:
    """Columns [x_{t-1}, ..., x_{t-L}] for t = L .. T-1."""
    x = np.asarray(series, dtype=float)
    t = len(x)
    return np.column_stack([x[lag_order - l : t - l] for l in range(1, lag_order + 1)])


@dataclass
class GrangerResult:
    source: str
    target: str
    lag_order: int
    f_statistic: float
    p_value: float
    significant: bool
    reverse_p_value: float
    asymmetric: bool
    exact_fit: bool = False


def _nested_f(x: np.ndarray, y: np.ndarray, lag_order: int) -> tuple[float, float, bool]:
    """F statistic and p-value for 'lags of x improve the AR(L) fit of y'."""
    t = len(y)
    response = y[lag_order:]
    own = lag_matrix(y, lag_order)
    cross = lag_matrix(x, lag_order)
    # intercept absorbed by demeaning over the shared estimation sample
    response = response - response.mean()
    own = own - own.mean(axis=0)
    cross = cross - cross.mean(axis=0)
    try:
        uni = ols(own, response, lag_order=lag_order)
        biv = ols(np.hstack([own, cross]), response, lag_order=lag_order)
    except SingularDesignError as exc:
        raise DegenerateSeriesError(f"degenerate series pair: {exc}") from exc
    assert uni.observations_used == biv.observations_used == t - lag_order
    dof_num = lag_order
    dof_den = uni.observations_used - 2 * lag_order - 1
    if biv.ssr <= 0.0:
        return float("inf"), 0.0, True
    f = max(0.0, (uni.ssr - biv.ssr) / dof_num) / (biv.ssr / dof_den)
    return f, f_survival(f, dof_num, dof_den), False


def granger_test(
    x: np.ndarray,
    y: np.ndarray,
    lag_order: int,
    source: str = "x",
    target: str = "y",
    alpha: float = 0.05,
) -> GrangerResult:
    """Granger test of x -> y at model order ``lag_order`` (lags 1..L).

    The reverse direction y -> x is evaluated on the same series so the
    result carries both p-values; ``asymmetric`` is True when the forward
    relation is significant and the reverse one is not.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d vectors of equal length")
    if lag_order < 1:
        raise ValueError("lag_order must be >= 1")
    t = len(y)
    if t <= 2 * lag_order + 10:
        raise InsufficientDataError(
            f"series length {t} too short for lag order {lag_order}"
        )
    f, p, exact = _nested_f(x, y, lag_order)
    _, reverse_p, _ = _nested_f(y, x, lag_order)
    significant = bool(p < alpha)
    return GrangerResult(
        source=source,
        target=target,
        lag_order=lag_order,
        f_statistic=f,
        p_value=p,
        significant=significant,
        reverse_p_value=reverse_p,
        asymmetric=significant and reverse_p >= alpha,
        exact_fit=exact,
    )


@dataclass
class SkippedPair:
    source: str
    target: str
    lag_order: int
    reason: str


@dataclass
class PairwiseResults:
    results: list[GrangerResult]
    skipped: list[SkippedPair]


def test_all_pairs(
    panel: Panel,
    lag_orders: Sequence[int],
    alpha: float = 0.05,
) -> PairwiseResults:
    """Granger-test every behavior column against every KPI column at every
    selected lag order; degenerate pairs are recorded, not fatal."""
    if not lag_orders:
        raise ValueError("no lag orders selected")
    sources = sorted(panel.columns_with_role("behavior"))
    targets = sorted(panel.columns_with_role("kpi"))
    results: list[GrangerResult] = []
    skipped: list[SkippedPair] = []
    for source in sources:
        for target in targets:
            for lag in sorted(lag_orders):
                try:
                    results.append(
                        granger_test(
                            panel.values(source),
                            panel.values(target),
                            lag,
                            source=source,
                            target=target,
                            alpha=alpha,
                        )
                    )
                except (DegenerateSeriesError, InsufficientDataError) as exc:
                    skipped.append(SkippedPair(source, target, lag, str(exc)))
    return PairwiseResults(results=results, skipped=skipped)


def asymmetry_ratio(results: Sequence[GrangerResult], alpha: float = 0.05) -> float:
    """Fraction of significant forward relations whose reverse direction is
    not significant (the one-directionality rate)."""
    significant = [r for r in results if r.significant]
    if not significant:
        raise InsufficientDataError(
            "asymmetry ratio undefined: no significant forward results"
        )
    one_directional = sum(1 for r in significant if r.reverse_p_value >= alpha)
    return one_directional / len(significant)
