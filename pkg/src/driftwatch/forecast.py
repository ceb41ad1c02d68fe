"""One-step-ahead Euler forecasts with rolling re-estimation.

The point forecast follows the fitted drift, ``X_s + a(X_s, theta_hat) h``;
for the mean-reverting OU model that is ``X_s + lam_hat (mu_hat - X_s) h``,
which pulls the forecast toward the long-run mean. The interval is
``forecast +/- 2 sigma_hat sqrt(h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_path, check_series
from .estimate import MdpdeConfig, ParamEstimate, fit
from .exceptions import DataError, DomainError, DriftwatchError
from .model import DriftModel, get_model
from .simulate import SamplePath

__all__ = [
    "ForecastRecord",
    "ForecastScore",
    "one_step_forecast",
    "rolling_evaluate",
    "score_records",
    "OneStepForecaster",
]


@dataclass(frozen=True)
class ForecastRecord:
    index: int | None
    predicted: float
    pi_lo: float
    pi_hi: float
    actual: float | None = None
    estimate_used: ParamEstimate | None = None

    @property
    def error(self) -> float:
        return self.actual - self.predicted

    @property
    def covered(self) -> bool:
        return self.pi_lo <= self.actual <= self.pi_hi


@dataclass(frozen=True)
class ForecastScore:
    rmse: float
    rmspe: float
    pi_coverage_count: int
    count: int

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "rmspe": self.rmspe,
            "pi_coverage_count": self.pi_coverage_count,
            "count": self.count,
        }


def one_step_forecast(model: DriftModel | str, est: ParamEstimate, x_s: float, h: float,
                      index: int | None = None) -> ForecastRecord:
    """Forecast the next observation from ``x_s`` under the fitted parameters."""
    if not h > 0:
        raise DomainError(f"h must be positive, got {h}")
    model = get_model(model)
    x_s = float(x_s)
    pred = x_s + float(model.drift(x_s, np.asarray(est.theta_hat, dtype=float))) * h
    half = 2.0 * est.sigma_hat * math.sqrt(h)
    return ForecastRecord(index=index, predicted=pred, pi_lo=pred - half, pi_hi=pred + half,
                          estimate_used=est)


def score_records(records) -> ForecastScore:
    """RMSE, RMSPE (errors relative to the actual) and interval hit count."""
    if not records:
        raise DataError("no forecasts to score")
    actual = np.array([r.actual for r in records], dtype=float)
    pred = np.array([r.predicted for r in records], dtype=float)
    if np.any(actual == 0):
        raise DataError("RMSPE is undefined when an actual value is zero")
    err = actual - pred
    rmse = math.sqrt(float(np.mean(err * err)))
    rmspe = math.sqrt(float(np.mean((err / actual) ** 2)))
    hits = sum(1 for r in records if r.covered)
    return ForecastScore(rmse=rmse, rmspe=rmspe, pi_coverage_count=hits, count=len(records))


class ForecastFitError(DriftwatchError):
    """A refit failed at a forecast origin; ``origin`` names it."""

    def __init__(self, origin, cause):
        super().__init__(f"fit failed at forecast origin s={origin}: {cause}")
        self.origin = origin
        self.cause = cause


def rolling_evaluate(
    model: DriftModel | str,
    full_path: SamplePath,
    eval_start: int,
    alpha: float = 0.0,
    refit_every: int = 1,
    from_index: int = 0,
    cfg: MdpdeConfig | None = None,
    *,
    estimate: ParamEstimate | None = None,
) -> tuple[ForecastScore, list[ForecastRecord]]:
    """Forecast observations ``eval_start + 1 .. n`` one step at a time.

    At origin ``s`` the parameters are estimated from observations
    ``from_index .. s``; with ``refit_every = k`` the refit happens at every
    ``k``-th origin and is reused in between. Passing ``estimate`` fixes the
    parameters for every origin instead.
    """
    model = get_model(model)
    n = full_path.n
    min_len = model.dim_theta + 2
    if not 0 <= from_index:
        raise DomainError("from_index must be non-negative")
    if not eval_start - from_index + 1 >= min_len:
        raise DomainError(
            f"eval_start={eval_start} leaves fewer than {min_len} observations after from_index={from_index}"
        )
    if not eval_start < n:
        raise DomainError(f"eval_start={eval_start} must be below the last index {n}")
    if refit_every < 1:
        raise DomainError("refit_every must be >= 1")
    base = cfg or MdpdeConfig()
    cfg = MdpdeConfig(alpha, base.max_iters, base.tol_x, base.tol_f, base.multistart_count)
    x = full_path.values
    h = full_path.step
    records = []
    est = estimate
    for j, s in enumerate(range(eval_start, n)):
        if estimate is None and j % refit_every == 0:
            try:
                est = fit(model, full_path.segment(from_index, s), cfg)
            except DriftwatchError as exc:
                raise ForecastFitError(s, exc) from exc
        rec = one_step_forecast(model, est, x[s], h, index=s + 1)
        records.append(ForecastRecord(rec.index, rec.predicted, rec.pi_lo, rec.pi_hi,
                                      float(x[s + 1]), est))
    return score_records(records), records


class OneStepForecaster(RegressorMixin, BaseEstimator):
    """Fit on a series, then predict the next value from any current value.

    ``predict(X)`` maps each current observation to its one-step forecast;
    ``predict_interval(X)`` returns the matching 95% bounds.
    """

    def __init__(self, model="ou-mean-reverting", alpha=0.0, h=None, multistart_count=5):
        self.model = model
        self.alpha = alpha
        self.h = h
        self.multistart_count = multistart_count

    def fit(self, X, y=None):
        path = as_path(X, self.h)
        self.model_ = get_model(self.model)
        self.step_ = path.step
        self.estimate_ = fit(self.model_, path,
                             MdpdeConfig(alpha=self.alpha, multistart_count=self.multistart_count))
        return self

    def predict(self, X):
        check_is_fitted(self, "estimate_")
        x = check_series(X)
        return np.array([one_step_forecast(self.model_, self.estimate_, v, self.step_).predicted
                         for v in x])

    def predict_interval(self, X):
        check_is_fitted(self, "estimate_")
        recs = [one_step_forecast(self.model_, self.estimate_, v, self.step_) for v in check_series(X)]
        return np.array([[r.pi_lo, r.pi_hi] for r in recs])
