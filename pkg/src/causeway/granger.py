"""Pairwise Granger causality on an anomaly window.

For an ordered channel pair (i, j) two autoregressions of j are fit over the
window, one on j's own lags (restricted) and one adding i's lags
(unrestricted), both without an intercept:

    restricted:    y_t = sum_k a_k * y_{t-k} + e_t
    unrestricted:  y_t = sum_k a_k * y_{t-k} + sum_k b_k * x_{t-k} + e'_t

The added lags are judged by the nested-model F statistic
F = ((RSS0 - RSS1)/p) / (RSS1/(n - 2p)) against F(p, n - 2p).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .anomaly import AnomalyEvent
from .config import WindowConfig
from .errors import (
    ConstantSeries,
    InvalidDegreesOfFreedom,
    NoEligibleChannels,
    SingularDesign,
    TooShort,
    WindowTooShort,
)
from .frames import TimeSeriesFrame
from .graph import CausalGraph, EdgeStat

logger = logging.getLogger(__name__)

# An RSS below this is a perfect fit; also the floor under denominators.
PERFECT_FIT_RSS = 1e-12


@dataclass
class ARFit:
    coefficients: np.ndarray   # own-lag coefficients, then cross-lag coefficients
    rss: float                 # residual sum of squares
    n_obs: int                 # rows after lag trimming
    n_params: int              # regressor count (lag, or 2*lag with a cross series)
    rank_deficient: bool = False


def _min_length(lag: int) -> int:
    # 2*lag + 6 keeps at least a handful of residual degrees of freedom; the
    # extra guard keeps df2 = n_obs - 2*lag positive for large lags.
    return max(2 * lag + 6, 3 * lag + 2)


def _design(y: np.ndarray, x: np.ndarray | None, lag: int, n_rows: int,
            include_intercept: bool) -> tuple[np.ndarray, np.ndarray]:
    """Regressand y_t and lagged regressors for rows t = len(y)-n_rows .. len(y)-1."""
    n = y.shape[0]
    first = n - n_rows
    cols = [y[first - k: n - k] for k in range(1, lag + 1)]
    if x is not None:
        cols += [x[first - k: n - k] for k in range(1, lag + 1)]
    if include_intercept:
        cols.append(np.ones(n_rows))
    return np.column_stack(cols), y[first:]


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Least squares via orthogonal factorization; returns (beta, rss, rank_deficient)."""
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(resid @ resid), rank < X.shape[1]


def fit_ar(y, x=None, lag: int = 3, include_intercept: bool = False,
           allow_rank_deficient: bool = False) -> ARFit:
    """OLS autoregression of y on its own lags, optionally plus x's lags.

    No intercept unless asked for. Rank-deficient designs raise SingularDesign
    unless the caller opts into the minimum-norm solution (used by the
    Granger test to recognize perfect fits).
    """
    y = np.asarray(y, dtype=np.float64)
    if lag < 1:
        raise TooShort(f"lag must be >= 1, got {lag}")
    if y.ndim != 1:
        raise TooShort("series must be one-dimensional")
    if x is not None:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != y.shape:
            raise TooShort(f"series lengths differ: {y.shape[0]} vs {x.shape[0]}")
    if y.shape[0] < _min_length(lag):
        raise TooShort(
            f"need at least {_min_length(lag)} observations for lag {lag}, got {y.shape[0]}")

    n_obs = y.shape[0] - lag
    X, target = _design(y, x, lag, n_obs, include_intercept)
    beta, rss, deficient = _ols(X, target)
    if deficient and not allow_rank_deficient:
        raise SingularDesign(
            f"regressor matrix is rank deficient ({X.shape[1]} columns)")
    return ARFit(beta, rss, n_obs, X.shape[1], deficient)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    max_iter, eps, tiny = 500, 1e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to well under 1e-10 absolute error."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    # The continued fraction converges fast on one side of the mean; use the
    # symmetry I_x(a,b) = 1 - I_{1-x}(b,a) for the other.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(f: float, df1: int, df2: int) -> float:
    """P(F_{df1,df2} > f) via the regularized incomplete beta."""
    if df1 < 1 or df2 < 1:
        raise InvalidDegreesOfFreedom(f"degrees of freedom must be >= 1, got ({df1}, {df2})")
    if math.isnan(f):
        raise InvalidDegreesOfFreedom("f statistic is NaN")
    if f <= 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


@dataclass
class GrangerResult:
    source: str
    dest: str
    f_stat: float        # may be +inf on a perfect unrestricted fit
    p_value: float
    df1: int
    df2: int
    lag_used: int


def granger_test(source, dest, lag: int = 3, include_intercept: bool = False,
                 source_id: str = "source", dest_id: str = "dest") -> GrangerResult:
    """Test whether source's past improves prediction of dest beyond dest's own past."""
    source = np.asarray(source, dtype=np.float64)
    dest = np.asarray(dest, dtype=np.float64)
    if source.shape != dest.shape:
        raise TooShort(f"series lengths differ: {source.shape[0]} vs {dest.shape[0]}")
    if np.ptp(source) == 0.0:
        raise ConstantSeries(f"source series {source_id!r} is constant")
    if np.ptp(dest) == 0.0:
        raise ConstantSeries(f"dest series {dest_id!r} is constant")

    restricted = fit_ar(dest, None, lag, include_intercept, allow_rank_deficient=True)
    unrestricted = fit_ar(dest, source, lag, include_intercept, allow_rank_deficient=True)
    rss0, rss1 = restricted.rss, unrestricted.rss
    n_obs = unrestricted.n_obs
    df1, df2 = lag, n_obs - 2 * lag - (1 if include_intercept else 0)
    if df2 < 1:
        raise TooShort(f"only {n_obs} effective observations for {2 * lag} parameters")

    if rss1 < PERFECT_FIT_RSS and rss0 > rss1:
        f_stat, p_value = math.inf, 0.0
    elif unrestricted.rank_deficient or restricted.rank_deficient:
        # A collinear design without a perfect fit carries no usable signal.
        raise SingularDesign(
            f"collinear regressors for pair ({source_id!r} -> {dest_id!r})")
    elif rss0 <= rss1:
        f_stat, p_value = 0.0, 1.0
    else:
        f_stat = ((rss0 - rss1) / df1) / (rss1 / df2)
        p_value = f_upper_tail(f_stat, df1, df2)
    return GrangerResult(source_id, dest_id, f_stat, p_value, df1, df2, lag)


def select_lag_bic(source, dest, p_max: int = 6) -> int:
    """Lag order minimizing BIC of the unrestricted model on a common sample.

    BIC(p) = n*ln(RSS(p)/n) + k*ln(n) with n = length - p_max and k = 2p;
    ties go to the smaller lag, and a perfect fit wins outright.
    """
    source = np.asarray(source, dtype=np.float64)
    dest = np.asarray(dest, dtype=np.float64)
    if source.shape != dest.shape:
        raise TooShort(f"series lengths differ: {source.shape[0]} vs {dest.shape[0]}")
    if dest.shape[0] < _min_length(p_max):
        raise TooShort(
            f"need at least {_min_length(p_max)} observations for p_max {p_max}")
    n = dest.shape[0] - p_max
    best_lag, best_bic = 1, math.inf
    for p in range(1, p_max + 1):
        X, target = _design(dest, source, p, n, include_intercept=False)
        _, rss, _ = _ols(X, target)
        if rss < PERFECT_FIT_RSS:
            bic = -math.inf
        else:
            bic = n * math.log(rss / n) + 2 * p * math.log(n)
        if bic < best_bic:
            best_lag, best_bic = p, bic
    return best_lag


def discover_graph(frame: TimeSeriesFrame, anomaly: AnomalyEvent,
                   cfg: WindowConfig) -> CausalGraph:
    """Granger-test every ordered channel pair over [t_a - w, t_a].

    Edges are inserted where p < alpha, weighted by the F statistic. Channels
    flagged zero-variance or constant within the window are skipped; collinear
    pairs are dropped with a diagnostic instead of failing the graph. The
    result is assembled in lexicographic pair order, so it is identical for
    any evaluation schedule.
    """
    w = cfg.window_length
    if anomaly.index < w:
        raise WindowTooShort(
            f"anomaly at index {anomaly.index} needs {w} preceding intervals")
    lo, hi = anomaly.index - w, anomaly.index + 1  # inclusive of the anomaly sample
    window = frame.values[:, lo:hi]

    eligible = []
    for c, cid in enumerate(frame.ids):
        if frame.zero_variance[c] or np.ptp(window[c]) == 0.0:
            continue
        eligible.append((cid, c))
    if len(eligible) < 2:
        raise NoEligibleChannels(
            f"need >= 2 non-constant channels in the window, have {len(eligible)}")

    graph = CausalGraph(nodes=sorted(cid for cid, _ in eligible))
    for src_id, src_c in sorted(eligible):
        for dst_id, dst_c in sorted(eligible):
            if src_id == dst_id:
                continue
            src, dst = window[src_c], window[dst_c]
            try:
                lag = (select_lag_bic(src, dst, cfg.p_max)
                       if cfg.lag_selection == "bic" else cfg.lag)
                result = granger_test(src, dst, lag, cfg.include_intercept,
                                      source_id=src_id, dest_id=dst_id)
            except SingularDesign as exc:
                graph.diagnostics.append(f"{src_id}->{dst_id}: {exc}")
                logger.warning("skipping pair %s -> %s: %s", src_id, dst_id, exc)
                continue
            if result.p_value < cfg.alpha:
                graph.edges[(src_id, dst_id)] = EdgeStat(
                    result.f_stat, result.p_value, result.lag_used)
    return graph
