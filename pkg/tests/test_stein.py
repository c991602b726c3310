import math

import numpy as np
import pytest

from locwp.stein import QuadSpec, normal_atoms, normal_expectation, stein_derivative, stein_residual, stein_solve


def test_normal_expectation():
    assert normal_expectation(lambda t: t ** 4) == pytest.approx(3.0, abs=1e-12)
    assert normal_expectation(np.cos) == pytest.approx(math.exp(-0.5), abs=1e-12)


@pytest.mark.parametrize("w", [-3.0, -0.5, 0.0, 0.7, 2.5])
def test_closed_forms(w):
    # h = t gives f = -1; h = t^2 gives f = -w
    assert stein_solve(lambda t: t, w) == pytest.approx(-1.0, abs=1e-10)
    assert stein_solve(lambda t: t ** 2, w) == pytest.approx(-w, abs=1e-10)
    assert stein_solve(lambda t: 0 * t + 4.0, w) == pytest.approx(0.0, abs=1e-12)


def test_both_representations_agree():
    h = np.tanh
    for w in (-1.0, 0.3, 1.2):
        assert stein_solve(h, w, side="left") == pytest.approx(stein_solve(h, w, side="right"), abs=1e-9)


@pytest.mark.parametrize("w", [-2.0, 0.0, 1.5])
def test_ode_holds(w):
    h = lambda t: np.exp(t / 2)
    nh = normal_expectation(h)
    f = stein_solve(h, w, nh=nh)
    assert stein_derivative(h, w, nh=nh) - w * f == pytest.approx(float(h(w)) - nh, abs=1e-8)


def test_residual_small_for_two_point_law():
    x = np.array([-1.0, 2.0])
    p = np.array([2 / 3, 1 / 3])
    assert abs(stein_residual(x, p, np.abs)) <= 1e-6
    x, w = normal_atoms()
    assert w.sum() == pytest.approx(1.0)


def test_quad_cutoff_changes_range():
    assert stein_solve(lambda t: t ** 3, 1.0, QuadSpec(cutoff=1e-12)) == pytest.approx(
        stein_solve(lambda t: t ** 3, 1.0), abs=1e-5)
