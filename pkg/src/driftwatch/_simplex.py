"""Box-constrained Nelder-Mead with project-and-penalize bound handling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

_RHO, _CHI, _PSI, _SIGMA = 1.0, 2.0, 0.5, 0.5
PENALTY_WEIGHT = 1e4


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def penalized(func: Callable[[np.ndarray], float], lower: np.ndarray, upper: np.ndarray):
    """Wrap ``func`` so points outside the box are projected and charged a quadratic penalty."""

    def wrapped(x):
        p = np.clip(x, lower, upper)
        f = func(p)
        d = x - p
        if d.any():
            scale = np.maximum(1.0, np.abs(p))
            f = f + PENALTY_WEIGHT * float(np.sum((d / scale) ** 2))
        return f

    return wrapped


def minimize_box(
    func: Callable[[np.ndarray], float],
    x0,
    lower,
    upper,
    *,
    max_iters: int = 2000,
    tol_x: float = 1e-8,
    tol_f: float = 1e-10,
    init_step: float = 0.05,
) -> SimplexResult:
    """Minimize ``func`` over the box ``[lower, upper]``.

    Stops once the simplex diameter is below ``tol_x`` (relative to the best
    vertex, floored at 1) and the spread of vertex values is below ``tol_f``.
    Non-finite objective values are treated as ``+inf``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    f = penalized(func, lower, upper)

    def fsafe(x):
        v = f(x)
        return v if np.isfinite(v) else np.inf

    d = x0.shape[0]
    sim = np.empty((d + 1, d))
    sim[0] = x0
    for j in range(d):
        y = x0.copy()
        step = init_step * abs(y[j]) if y[j] != 0 else 2.5e-4
        # step inward when x0 sits on the upper face
        y[j] = y[j] + step if y[j] + step <= upper[j] else y[j] - step
        sim[j + 1] = y
    fs = np.array([fsafe(v) for v in sim])

    it = 0
    converged = False
    while it < max_iters:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = np.max(np.abs(sim[1:] - sim[0]))
        if (
            np.isfinite(fs[-1])
            and diam <= tol_x * max(1.0, np.max(np.abs(sim[0])))
            and fs[-1] - fs[0] <= tol_f
        ):
            converged = True
            break
        it += 1
        xbar = sim[:-1].mean(axis=0)
        xr = xbar + _RHO * (xbar - sim[-1])
        fr = fsafe(xr)
        if fr < fs[0]:
            xe = xbar + _CHI * (xr - xbar)
            fe = fsafe(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = xbar + _PSI * (xr - xbar)
            fc = fsafe(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = xbar - _PSI * (xbar - sim[-1])
            fc = fsafe(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        # shrink toward the best vertex
        sim[1:] = sim[0] + _SIGMA * (sim[1:] - sim[0])
        fs[1:] = [fsafe(v) for v in sim[1:]]

    best = int(np.argmin(fs))
    x = np.clip(sim[best], lower, upper)
    return SimplexResult(x=x, fun=float(func(x)), iterations=it, converged=converged)
