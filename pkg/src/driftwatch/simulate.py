"""Euler-scheme path generation and additive outlier contamination.

Randomness comes from numpy's PCG64 bit generator; normal variates use
numpy's ziggurat sampler (``Generator.standard_normal``). Every function
takes an explicit seed so identical inputs give bit-identical paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DataError, DomainError, ParameterShapeError
from .model import DriftModel, get_model

__all__ = [
    "SamplePath",
    "ContaminationSpec",
    "SimConfig",
    "simulate_path",
    "simulate_path_with_change",
    "simulate_path_with_changes",
    "contaminate",
    "derive_seed",
    "make_rng",
]


def make_rng(seed) -> np.random.Generator:
    """Build a PCG64 generator from an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise DomainError("an explicit seed is required")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(base_seed: int, *keys: int) -> int:
    """Mix ``base_seed`` with integer keys into an independent 64-bit seed.

    Uses ``SeedSequence(base_seed, spawn_key=keys)``, so replication ``r``
    gets the same stream no matter which worker runs it or in what order.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SamplePath:
    """Equally spaced observations ``X_0, ..., X_n`` taken every ``step`` time units.

    ``shocks`` holds the standard normal increments used at observation
    scale when the path was generated by one Euler step per observation;
    it is ``None`` otherwise.
    """

    step: float
    values: np.ndarray
    shocks: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 3:
            raise DataError("a sample path needs at least 3 observations (n >= 2)")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise DomainError(f"step must be positive and finite, got {self.step}")
        object.__setattr__(self, "values", values)
        if self.shocks is not None:
            shocks = np.asarray(self.shocks, dtype=float)
            if shocks.shape != (values.shape[0] - 1,):
                raise DataError("shocks must have one entry per increment")
            object.__setattr__(self, "shocks", shocks)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.n + 1)

    def segment(self, start: int, end: int) -> "SamplePath":
        """Observations ``start..end`` inclusive, as a new path."""
        shocks = None if self.shocks is None else self.shocks[start:end]
        return SamplePath(self.step, self.values[start : end + 1], shocks)


@dataclass(frozen=True)
class ContaminationSpec:
    """Bernoulli(prob) occurrence of outliers with N(0, var_v) magnitudes."""

    prob: float
    var_v: float

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise DomainError(f"contamination prob must lie in [0, 1], got {self.prob}")
        if not self.var_v >= 0.0:
            raise DomainError(f"outlier variance must be >= 0, got {self.var_v}")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Give either ``h`` (observation step) or ``gamma`` (then ``h = n**-gamma``).
    Paths are generated at ``h / substeps`` and subsampled.
    """

    n: int
    h: float | None = None
    gamma: float | None = 0.75
    substeps: int = 20
    x0: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("n must be at least 2")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")
        if self.h is None and self.gamma is None:
            raise DomainError("give either h or gamma")
        if not self.step > 0:
            raise DomainError("observation step must be positive")

    @property
    def step(self) -> float:
        if self.h is not None:
            return float(self.h)
        return float(self.n) ** (-float(self.gamma))


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not (sigma >= 0 and math.isfinite(sigma)):
        raise DomainError(f"sigma must be finite and non-negative, got {sigma}")
    return sigma


def _euler(model, regimes, cfg: SimConfig) -> SamplePath:
    # regimes: list of (first_generation_step, theta_tuple, sigma)
    h = cfg.step
    m = cfg.substeps
    delta = h / m
    sq = math.sqrt(delta)
    total = cfg.n * m
    xi = make_rng(cfg.seed).standard_normal(total)
    drift = model.drift
    out = np.empty(cfg.n + 1)
    out[0] = x = float(cfg.x0)
    bounds = [r[0] for r in regimes[1:]] + [total]
    k = 0
    for (_, theta, sigma), stop in zip(regimes, bounds):
        noise = (sigma * sq) * xi[k:stop]
        for j in range(stop - k):
            x = x + float(drift(x, theta)) * delta + float(noise[j])
            if (k + j + 1) % m == 0:
                out[(k + j + 1) // m] = x
        k = stop
    if not np.all(np.isfinite(out)):
        raise DataError("simulated path diverged; reduce the step or the drift rate")
    shocks = xi.copy() if m == 1 else None
    return SamplePath(h, out, shocks)


def simulate_path(model: DriftModel | str, theta, sigma: float, cfg: SimConfig) -> SamplePath:
    """Euler-scheme path of ``dX = a(X, theta) dt + sigma dW``.

    The path is generated with step ``h / cfg.substeps`` and every
    ``substeps``-th point is kept. ``sigma = 0`` gives the noise-free
    recursion.
    """
    model = get_model(model)
    theta = tuple(float(t) for t in model.check_theta(theta))
    sigma = _check_sigma(sigma)
    return _euler(model, [(0, theta, sigma)], cfg)


def simulate_path_with_change(
    model: DriftModel | str,
    theta0,
    sigma0: float,
    theta1,
    sigma1: float,
    change_frac: float,
    cfg: SimConfig,
) -> SamplePath:
    """Like :func:`simulate_path` but parameters switch mid-path.

    The switch happens at generation step ``floor(change_frac * n * substeps)``;
    the path itself stays continuous.
    """
    return simulate_path_with_changes(model, [(theta0, sigma0), (theta1, sigma1)], [change_frac], cfg)


def simulate_path_with_changes(model: DriftModel | str, regimes, change_fracs, cfg: SimConfig) -> SamplePath:
    """Piecewise-constant parameters with any number of switches.

    Parameters
    ----------
    regimes : sequence of (theta, sigma)
        One more entry than ``change_fracs``.
    change_fracs : sequence of float
        Strictly increasing fractions in (0, 1); regime ``j + 1`` starts at
        generation step ``floor(change_fracs[j] * n * substeps)``.
    """
    model = get_model(model)
    fracs = [float(f) for f in change_fracs]
    if len(regimes) != len(fracs) + 1:
        raise ParameterShapeError("need exactly one more regime than change fractions")
    if any(not 0.0 < f < 1.0 for f in fracs) or any(b <= a for a, b in zip(fracs, fracs[1:])):
        raise DomainError(f"change fractions must be increasing and lie in (0, 1), got {fracs}")
    starts = [0] + [int(math.floor(f * cfg.n * cfg.substeps)) for f in fracs]
    spec = [
        (k, tuple(float(t) for t in model.check_theta(theta)), _check_sigma(sigma))
        for k, (theta, sigma) in zip(starts, regimes)
    ]
    return _euler(model, spec, cfg)


def contaminate(path: SamplePath, spec: ContaminationSpec, seed) -> SamplePath:
    """Add outliers ``p_i * |V_i| * sign(X_i)`` to every observation, ``X_0`` included.

    ``sign(0)`` is taken as +1. The returned path has no ``shocks``.
    """
    rng = make_rng(seed)
    size = path.values.shape[0]
    hit = rng.random(size) < spec.prob
    v = rng.standard_normal(size) * math.sqrt(spec.var_v)
    sign = np.where(path.values >= 0, 1.0, -1.0)
    values = path.values + hit * np.abs(v) * sign
    return replace(path, values=values, shocks=None)
