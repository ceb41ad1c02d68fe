import numpy as np
import pytest

from driftwatch._simplex import minimize_box


def rosen(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_unconstrained_minimum_inside_box():
    res = minimize_box(rosen, [-1.2, 1.0], [-5, -5], [5, 5])
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_minimum_on_the_boundary():
    # unconstrained minimum at (3, -2); the box clips both coordinates
    f = lambda x: (x[0] - 3) ** 2 + (x[1] + 2) ** 2
    res = minimize_box(f, [0.5, 0.5], [0, 0], [1, 1])
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-6)
    assert np.all(res.x >= 0) and np.all(res.x <= 1)


def test_result_never_worse_than_start():
    f = lambda x: np.sin(5 * x[0]) + (x[0] - 0.3) ** 2
    x0 = [2.0]
    res = minimize_box(f, x0, [-3], [3])
    assert res.fun <= f(np.array(x0))


def test_iteration_cap_reports_not_converged():
    res = minimize_box(rosen, [-1.2, 1.0], [-5, -5], [5, 5], max_iters=5)
    assert not res.converged
    assert res.iterations == 5


def test_nonfinite_values_are_avoided():
    f = lambda x: np.inf if x[0] < 0.5 else (x[0] - 1) ** 2
    res = minimize_box(f, [2.0], [0], [3])
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)
