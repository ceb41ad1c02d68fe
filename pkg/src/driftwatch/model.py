"""Drift specifications for scalar diffusions dX = a(X, theta) dt + sigma dW.

Drift callables must broadcast over numpy arrays in ``x``; the estimator
and residual code evaluate them on whole paths at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import DomainError, ParameterShapeError

__all__ = [
    "DriftModel",
    "OuCentered",
    "OuMeanReverting",
    "evaluate_drift",
    "get_model",
    "MODEL_NAMES",
]

DEFAULT_RATE_BOUNDS = (0.01, 1000.0)
DEFAULT_MEAN_BOUNDS = (-1e6, 1e6)
DEFAULT_SIGMA_BOUNDS = (0.01, 1000.0)


@dataclass(frozen=True)
class DriftModel:
    """A drift family ``a(x, theta)`` with a bounded parameter box.

    Smoothness, ergodicity and moment conditions needed by the asymptotic
    theory are the caller's responsibility; nothing here checks them.

    Parameters
    ----------
    name : str
        Identifier used by the CLI and in reports.
    dim_theta : int
        Number of drift parameters.
    drift : callable
        ``drift(x, theta) -> array``; must broadcast over ``x``.
    theta_bounds : sequence of (lo, hi)
        Closed interval per drift coordinate.
    sigma_bounds : (lo, hi)
        Closed interval for the dispersion, ``lo > 0``.
    regressors : callable, optional
        ``regressors(x) -> (n, dim_theta)`` design matrix when the drift is
        linear in theta. Used only to build a least-squares starting point.
    """

    name: str
    dim_theta: int
    drift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    theta_bounds: tuple[tuple[float, float], ...]
    sigma_bounds: tuple[float, float] = DEFAULT_SIGMA_BOUNDS
    regressors: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    theta_from_coef: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim_theta < 1:
            raise ParameterShapeError("dim_theta must be positive")
        if len(self.theta_bounds) != self.dim_theta:
            raise ParameterShapeError(
                f"theta_bounds has {len(self.theta_bounds)} entries, expected {self.dim_theta}"
            )
        for lo, hi in self.theta_bounds:
            if not lo <= hi:
                raise DomainError(f"empty theta interval [{lo}, {hi}]")
        lo, hi = self.sigma_bounds
        if not (0.0 < lo <= hi):
            raise DomainError("sigma_bounds must satisfy 0 < lo <= hi")

    @property
    def lower(self) -> np.ndarray:
        """Lower corner of the (theta, sigma) box."""
        return np.array([b[0] for b in self.theta_bounds] + [self.sigma_bounds[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.theta_bounds] + [self.sigma_bounds[1]])

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.ndim != 1 or theta.shape[0] != self.dim_theta:
            raise ParameterShapeError(
                f"{self.name} expects {self.dim_theta} drift parameter(s), got shape {theta.shape}"
            )
        for j, (lo, hi) in enumerate(self.theta_bounds):
            if not lo <= theta[j] <= hi:
                raise DomainError(f"theta[{j}]={theta[j]} outside [{lo}, {hi}]")
        return theta

    def check_sigma(self, sigma: float) -> float:
        sigma = float(sigma)
        lo, hi = self.sigma_bounds
        if not lo <= sigma <= hi:
            raise DomainError(f"sigma={sigma} outside [{lo}, {hi}]")
        return sigma


def _ou_centered_drift(x, theta):
    return -theta[0] * x


def _ou_centered_regressors(x):
    return -np.asarray(x, dtype=float)[:, None]


def _ou_mr_drift(x, theta):
    return theta[0] * (theta[1] - x)


def _ou_mr_regressors(x):
    x = np.asarray(x, dtype=float)
    # a(x) = lam*mu - lam*x  ->  coefficients (lam*mu, lam) on (1, -x)
    return np.column_stack([np.ones_like(x), -x])


def _ou_mr_from_coef(coef):
    c0, lam = coef
    mu = c0 / lam if lam != 0 else 0.0
    return np.array([lam, mu])


def OuCentered(
    theta_bounds: tuple[float, float] = DEFAULT_RATE_BOUNDS,
    sigma_bounds: tuple[float, float] = DEFAULT_SIGMA_BOUNDS,
) -> DriftModel:
    """Centered OU process, ``a(x, theta) = -theta * x``."""
    return DriftModel(
        name="ou-centered",
        dim_theta=1,
        drift=_ou_centered_drift,
        theta_bounds=(tuple(theta_bounds),),
        sigma_bounds=tuple(sigma_bounds),
        regressors=_ou_centered_regressors,
    )


def OuMeanReverting(
    lambda_bounds: tuple[float, float] = DEFAULT_RATE_BOUNDS,
    mu_bounds: tuple[float, float] = DEFAULT_MEAN_BOUNDS,
    sigma_bounds: tuple[float, float] = DEFAULT_SIGMA_BOUNDS,
) -> DriftModel:
    """Mean-reverting OU process, ``a(x, (lam, mu)) = lam * (mu - x)``."""
    return DriftModel(
        name="ou-mean-reverting",
        dim_theta=2,
        drift=_ou_mr_drift,
        theta_bounds=(tuple(lambda_bounds), tuple(mu_bounds)),
        sigma_bounds=tuple(sigma_bounds),
        regressors=_ou_mr_regressors,
        theta_from_coef=_ou_mr_from_coef,
    )


MODEL_NAMES = ("ou-centered", "ou-mean-reverting")
_FACTORIES = {"ou-centered": OuCentered, "ou-mean-reverting": OuMeanReverting}


def get_model(model: str | DriftModel) -> DriftModel:
    """Resolve a model name (``ou-centered`` / ``ou-mean-reverting``) or pass through."""
    if isinstance(model, DriftModel):
        return model
    try:
        return _FACTORIES[model]()
    except KeyError:
        raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODEL_NAMES)}") from None


def evaluate_drift(model: DriftModel | str, x: float, theta: Sequence[float] | float) -> float:
    """Evaluate ``a(x, theta)`` after checking the parameter shape and bounds."""
    model = get_model(model)
    theta = model.check_theta(theta)
    return float(model.drift(np.float64(x), theta))
