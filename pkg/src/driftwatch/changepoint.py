"""Residual CUSUM-of-squares tests for a change in the dispersion parameter.

Residuals are standardized Euler innovations under fitted parameters.
Their squares, optionally trimmed, are scanned with a CUSUM whose null
limit is the supremum of a standard Brownian bridge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_path, check_series
from .estimate import MdpdeConfig, ParamEstimate, fit
from .exceptions import DataError, DegenerateScaleError, DomainError
from .model import DriftModel, get_model
from .simulate import SamplePath

__all__ = [
    "Trim",
    "TrimSpec",
    "ResidualSeries",
    "TestOutcome",
    "SegmentationResult",
    "residuals",
    "trim_value",
    "trim_values",
    "cusum_scan",
    "cusum_statistic",
    "bb_sup_tail",
    "critical_value",
    "run_test",
    "binary_segmentation",
    "segment_estimates",
    "RobustCusumTest",
    "BinarySegmentation",
    "M_995",
    "M_975",
]

# squared two-sided normal quantiles at 1% and 5%
M_995 = 6.63
M_975 = 3.84


class Trim(str, enum.Enum):
    NONE = "none"
    HARD = "hard"  # min(x, M)
    TENT = "tent"  # x on [0, M], 2M - x on (M, 2M], 0 beyond


@dataclass(frozen=True)
class TrimSpec:
    variant: Trim = Trim.TENT
    m: float = M_995

    def __post_init__(self):
        object.__setattr__(self, "variant", Trim(self.variant))
        if self.variant is not Trim.NONE and not self.m > 0:
            raise DomainError(f"trimming constant M must be positive, got {self.m}")

    @property
    def label(self) -> str:
        if self.variant is Trim.NONE:
            return "none"
        return f"{self.variant.value}(M={self.m:g})"


@dataclass(frozen=True)
class ResidualSeries:
    values: np.ndarray
    h: float
    estimate: ParamEstimate | None = None


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p_value: float
    k_hat: int
    tau_hat: float
    trim: TrimSpec
    alpha: float | None = None
    estimate: ParamEstimate | None = None

    __test__ = False  # keep pytest from collecting this as a test class

    def to_dict(self) -> dict:
        d = {
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "k_hat": int(self.k_hat),
            "tau_hat": float(self.tau_hat),
            "trim": self.trim.variant.value,
            "M": None if self.trim.variant is Trim.NONE else float(self.trim.m),
            "alpha": None if self.alpha is None else float(self.alpha),
        }
        if self.estimate is not None:
            d["estimate"] = self.estimate.to_dict()
        return d


@dataclass(frozen=True)
class SegmentationResult:
    change_points: list[int]
    segments: list[tuple[int, int, ParamEstimate | None]]
    level: float
    tests: list[tuple[int, int, TestOutcome]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "change_points": [int(c) for c in self.change_points],
            "level": float(self.level),
            "segments": [
                {"start": int(s), "end": int(e), "estimate": None if est is None else est.to_dict()}
                for s, e, est in self.segments
            ],
        }


def residuals(model: DriftModel | str, path: SamplePath, est: ParamEstimate) -> ResidualSeries:
    """Standardized innovations ``(dX_i - a(X_{i-1}, theta) h) / (sqrt(h) sigma)``, i = 1..n."""
    model = get_model(model)
    if not est.sigma_hat > 0:
        raise DomainError(f"sigma_hat must be positive, got {est.sigma_hat}")
    v = path.values
    if not np.all(np.isfinite(v)):
        raise DataError("path contains non-finite values")
    h = path.step
    theta = np.asarray(est.theta_hat, dtype=float)
    z = (np.diff(v) - model.drift(v[:-1], theta) * h) / (math.sqrt(h) * est.sigma_hat)
    if not np.all(np.isfinite(z)):
        raise DataError("non-finite residuals")
    return ResidualSeries(values=z, h=h, estimate=est)


def trim_values(spec: TrimSpec, x) -> np.ndarray:
    """Vectorized :func:`trim_value`."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("trimming functions are defined on [0, inf)")
    m = spec.m
    if spec.variant is Trim.NONE:
        return x.copy()
    if spec.variant is Trim.HARD:
        return np.minimum(x, m)
    return np.where(x <= m, x, np.where(x <= 2.0 * m, 2.0 * m - x, 0.0))


def trim_value(spec: TrimSpec, x: float) -> float:
    """Trim one non-negative value (a squared residual)."""
    if x < 0:
        raise DomainError("trimming functions are defined on [0, inf)")
    return float(trim_values(spec, np.float64(x)))


def cusum_scan(values, check_scale: bool = True) -> tuple[float, int, float]:
    """CUSUM scan of already-transformed values.

    Returns ``(statistic, k_hat, tau_hat)`` where
    ``statistic = max_k |S_k - (k/n) S_n| / (sqrt(n) tau_hat)``, ``k_hat`` is the
    smallest maximizing ``k`` (1-based) and ``tau_hat`` the population standard
    deviation of ``values``.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if n < 2:
        raise DataError("CUSUM needs at least 2 values")
    tau = math.sqrt(float(np.var(f)))
    dev = np.abs(np.cumsum(f - f.mean()))
    # the k = n term is zero by construction
    dev[-1] = 0.0
    num = float(dev.max())
    # ties up to rounding go to the earliest index
    k = int(np.argmax(dev >= num * (1.0 - 1e-12)))
    if tau == 0.0:
        if check_scale:
            raise DegenerateScaleError("all transformed residuals are equal; scale estimate is zero")
        return (0.0 if num == 0.0 else math.inf), k + 1, 0.0
    return num / (math.sqrt(n) * tau), k + 1, tau


def cusum_statistic(series, trim: TrimSpec | None = None, check_scale: bool = True) -> TestOutcome:
    """CUSUM of (trimmed) squared residuals with its asymptotic p-value.

    ``series`` holds residuals, not their squares. ``trim=None`` or
    ``Trim.NONE`` gives the untrimmed CUSUM-of-squares statistic.
    """
    trim = trim or TrimSpec(Trim.NONE)
    z = check_series(series.values if isinstance(series, ResidualSeries) else series)
    f = trim_values(trim, z * z)
    stat, k, tau = cusum_scan(f, check_scale=check_scale)
    est = series.estimate if isinstance(series, ResidualSeries) else None
    return TestOutcome(
        statistic=stat,
        p_value=bb_sup_tail(stat),
        k_hat=k,
        tau_hat=tau,
        trim=trim,
        alpha=None if est is None else est.alpha,
        estimate=est,
    )


_TAIL_EPS = 1e-17


def bb_sup_tail(u: float) -> float:
    """``P(sup_{0<=t<=1} |B(t)| > u)`` for a standard Brownian bridge B.

    For ``u >= 0.3`` the alternating series ``2 sum_{k>=1} (-1)^(k+1) exp(-2 k^2 u^2)``
    is summed until the next term is below 1e-17 (alternating, so that bounds the
    error). Below 0.3 the equivalent theta-function form
    ``1 - sqrt(2 pi)/u sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 u^2))`` converges faster.
    """
    u = float(u)
    if not u > 0:
        return 1.0
    if math.isinf(u):
        return 0.0
    if u < 0.3:
        c = -(math.pi**2) / (8.0 * u * u)
        s = 0.0
        k = 1
        while True:
            term = math.exp(c * (2 * k - 1) ** 2)
            s += term
            if term < _TAIL_EPS * max(s, 1e-300) or term == 0.0:
                break
            k += 1
        cdf = math.sqrt(2.0 * math.pi) / u * s
        return min(1.0, max(0.0, 1.0 - cdf))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * u * u)
        s += term if k % 2 else -term
        if math.exp(-2.0 * (k + 1) ** 2 * u * u) < _TAIL_EPS:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def critical_value(level: float = 0.05) -> float:
    """Upper ``level`` quantile of the Brownian-bridge supremum, by bisection to 1e-10."""
    level = float(level)
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    lo, hi = 1e-3, 10.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if bb_sup_tail(mid) > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def run_test(
    model: DriftModel | str,
    path: SamplePath,
    alpha: float = 0.2,
    trim: TrimSpec | None = None,
    cfg: MdpdeConfig | None = None,
    *,
    estimate: ParamEstimate | None = None,
) -> TestOutcome:
    """Fit, compute residuals, and run the CUSUM scan.

    ``alpha=0`` with ``trim=TrimSpec("none")`` is the naive quasi-MLE
    CUSUM-of-squares test. A precomputed ``estimate`` skips the fit, which
    lets several trimming variants share one estimate.
    """
    model = get_model(model)
    trim = trim if trim is not None else TrimSpec()
    if estimate is None:
        base = cfg or MdpdeConfig()
        cfg = MdpdeConfig(
            alpha=alpha,
            max_iters=base.max_iters,
            tol_x=base.tol_x,
            tol_f=base.tol_f,
            multistart_count=base.multistart_count,
        )
        estimate = fit(model, path, cfg)
    return cusum_statistic(residuals(model, path, estimate), trim)


def _refit(model, path, start, end, cfg):
    try:
        return fit(model, path.segment(start, end), cfg)
    except DataError:
        return None


def binary_segmentation(
    model: DriftModel | str,
    path: SamplePath,
    alpha: float = 0.2,
    trim: TrimSpec | None = None,
    level: float = 0.05,
    min_segment: int = 30,
    cfg: MdpdeConfig | None = None,
) -> SegmentationResult:
    """Recursive splitting at the CUSUM argmax.

    A segment of observations ``[s, e]`` is tested when it holds at least
    ``min_segment`` observations. On rejection at ``level`` with both children
    ``[s, s + k_hat]`` and ``[s + k_hat + 1, e]`` at least ``min_segment`` long,
    ``s + k_hat`` becomes a change point and both children are processed.
    Final segments are refitted.
    """
    model = get_model(model)
    trim = trim if trim is not None else TrimSpec()
    if min_segment < model.dim_theta + 2:
        raise DomainError(f"min_segment must be at least {model.dim_theta + 2}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    base = cfg or MdpdeConfig()
    cfg = MdpdeConfig(alpha, base.max_iters, base.tol_x, base.tol_f, base.multistart_count)

    n = path.n
    cps: list[int] = []
    tests = []
    stack = [(0, n)]
    while stack:
        s, e = stack.pop()
        if e - s + 1 < min_segment:
            continue
        out = run_test(model, path.segment(s, e), alpha, trim, cfg)
        tests.append((s, e, out))
        if out.p_value >= level:
            continue
        cut = s + out.k_hat
        if cut - s + 1 < min_segment or e - cut < min_segment:
            continue
        cps.append(cut)
        stack.append((cut + 1, e))
        stack.append((s, cut))
    cps.sort()
    bounds = _segment_bounds(cps, n)
    segments = [(s, e, _refit(model, path, s, e, cfg)) for s, e in bounds]
    tests.sort(key=lambda t: t[0])
    return SegmentationResult(change_points=cps, segments=segments, level=level, tests=tests)


def _segment_bounds(cps, n):
    starts = [0] + [c + 1 for c in cps]
    ends = list(cps) + [n]
    return list(zip(starts, ends))


def segment_estimates(
    model: DriftModel | str,
    path: SamplePath,
    change_points,
    alphas,
    cfg: MdpdeConfig | None = None,
) -> list[dict]:
    """Refit every segment for each ``alpha``; one row per (segment, alpha)."""
    model = get_model(model)
    base = cfg or MdpdeConfig()
    rows = []
    for s, e in _segment_bounds(sorted(change_points), path.n):
        for a in alphas:
            c = MdpdeConfig(a, base.max_iters, base.tol_x, base.tol_f, base.multistart_count)
            est = _refit(model, path, s, e, c)
            rows.append({"start": s, "end": e, "alpha": float(a),
                         "estimate": None if est is None else est.to_dict()})
    return rows


def _trim_from_params(trim, M):
    if isinstance(trim, TrimSpec):
        return trim
    return TrimSpec(Trim(trim), M)


class RobustCusumTest(BaseEstimator):
    """Single change-point test for the dispersion of a diffusion.

    Parameters
    ----------
    model : str or DriftModel, default="ou-centered"
    alpha : float, default=0.2
        Divergence exponent of the robust estimator; 0 is the quasi-MLE.
    trim : {"tent", "hard", "none"}, default="tent"
    M : float, default=6.63
    level : float, default=0.05
    h : float, optional
        Observation step; required for plain arrays.
    multistart_count : int, default=5

    Attributes
    ----------
    statistic_, p_value_, change_point_, tau_ : test results
    reject_ : bool
        ``p_value_ < level``.
    outcome_ : TestOutcome
    estimate_ : ParamEstimate
    """

    def __init__(self, model="ou-centered", alpha=0.2, trim="tent", M=M_995, level=0.05, h=None,
                 multistart_count=5):
        self.model = model
        self.alpha = alpha
        self.trim = trim
        self.M = M
        self.level = level
        self.h = h
        self.multistart_count = multistart_count

    def fit(self, X, y=None):
        path = as_path(X, self.h)
        cfg = MdpdeConfig(alpha=self.alpha, multistart_count=self.multistart_count)
        out = run_test(get_model(self.model), path, self.alpha,
                       _trim_from_params(self.trim, self.M), cfg)
        self.outcome_ = out
        self.estimate_ = out.estimate
        self.statistic_ = out.statistic
        self.p_value_ = out.p_value
        self.change_point_ = out.k_hat
        self.tau_ = out.tau_hat
        self.reject_ = bool(out.p_value < self.level)
        return self

    def predict(self, X=None):
        """Detected change points (0 or 1 of them) as an index array."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "outcome_")
        return np.array([self.change_point_] if self.reject_ else [], dtype=int)

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()


class BinarySegmentation(BaseEstimator):
    """Multiple dispersion change points by recursive robust CUSUM tests.

    Same parameters as :class:`RobustCusumTest`, plus ``min_segment``.

    Attributes
    ----------
    change_points_ : ndarray of int
    segments_ : list of (start, end, ParamEstimate)
    result_ : SegmentationResult
    """

    def __init__(self, model="ou-centered", alpha=0.2, trim="tent", M=M_995, level=0.05, h=None,
                 min_segment=30, multistart_count=5):
        self.model = model
        self.alpha = alpha
        self.trim = trim
        self.M = M
        self.level = level
        self.h = h
        self.min_segment = min_segment
        self.multistart_count = multistart_count

    def fit(self, X, y=None):
        path = as_path(X, self.h)
        cfg = MdpdeConfig(alpha=self.alpha, multistart_count=self.multistart_count)
        res = binary_segmentation(get_model(self.model), path, self.alpha,
                                  _trim_from_params(self.trim, self.M), self.level,
                                  self.min_segment, cfg)
        self.result_ = res
        self.change_points_ = np.array(res.change_points, dtype=int)
        self.segments_ = res.segments
        return self

    def predict(self, X=None):
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "result_")
        return self.change_points_

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()
