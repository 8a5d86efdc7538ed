import math

import numpy as np
import pytest

from qndsim.phaseprep import noon_target, phase_target
from qndsim.states import TruncationWarning, coherent_state, fock_state
from qndsim.wigner import (
    UndersizedGridError,
    WignerGrid,
    hermite_functions,
    marginal_check,
    momentum_density,
    position_density,
    wigner_function,
)

AXIS = np.linspace(-6, 6, 201)


def test_vacuum_closed_form():
    x = np.linspace(-4, 4, 41)
    g = wigner_function([1.0], x, x)
    X, P = np.meshgrid(x, x, indexing="ij")
    assert np.max(np.abs(g.values - np.exp(-X**2 - P**2) / math.pi)) < 1e-12
    assert g.values[20, 20] == pytest.approx(1 / math.pi, abs=1e-8)


def test_single_phonon_closed_form():
    x = np.linspace(-4, 4, 41)
    g = wigner_function([0.0, 1.0], x, x)
    X, P = np.meshgrid(x, x, indexing="ij")
    r2 = X**2 + P**2
    assert np.max(np.abs(g.values - (2 * r2 - 1) * np.exp(-r2) / math.pi)) < 1e-12
    assert g.values[20, 20] == pytest.approx(-1 / math.pi, abs=1e-8)


def test_coherent_state_is_displaced_gaussian():
    alpha = 1.2 - 0.7j
    x0, p0 = math.sqrt(2) * alpha.real, math.sqrt(2) * alpha.imag
    x = np.linspace(-5, 5, 31)
    g = wigner_function(coherent_state(alpha, 40), x, x)
    X, P = np.meshgrid(x, x, indexing="ij")
    assert np.max(np.abs(g.values - np.exp(-(X - x0) ** 2 - (P - p0) ** 2) / math.pi)) < 1e-10


def test_bounded_and_real():
    g = wigner_function(phase_target(10).q, AXIS[::4], AXIS[::4])
    assert np.all(np.isfinite(g.values))
    assert np.max(np.abs(g.values)) <= 1 / math.pi + 1e-9


def test_noon_normalization_on_covering_grid():
    # at N = 20 the state reaches |x| ~ sqrt(2 N + 1) ~ 6.4, so [-6, 6] clips it
    axis = np.linspace(-9, 9, 361)
    g = wigner_function(noon_target(20).q, axis, axis)
    assert g.integral() == pytest.approx(1, abs=1e-3)


def test_phase_state_normalization_and_marginals():
    g = wigner_function(phase_target(10).q, AXIS, AXIS)
    assert g.integral() == pytest.approx(1, abs=1e-3)
    ex, ep = marginal_check(g, phase_target(10).q)
    assert ex < 1e-4 and ep < 1e-4


def test_vacuum_marginals():
    g = wigner_function([1.0], AXIS, AXIS)
    ex, ep = marginal_check(g, [1.0])
    assert ex < 1e-6 and ep < 1e-6


def test_fock_three_marginals():
    q = fock_state(3, 4).amplitudes
    g = wigner_function(q, AXIS, AXIS)
    ex, ep = marginal_check(g, q)
    assert ex < 1e-5 and ep < 1e-5


def test_undersized_grid_rejected():
    q = coherent_state(3.0, 40).amplitudes
    small = np.linspace(-1, 1, 21)
    g = wigner_function(q, small, small)
    with pytest.raises(UndersizedGridError):
        marginal_check(g, q)


def test_small_work_space_warns():
    with pytest.warns(TruncationWarning):
        wigner_function(phase_target(10).q, AXIS[::10], AXIS[::10], work_dim=20)


def test_unnormalized_input_rejected():
    with pytest.raises(ValueError):
        wigner_function([1.0, 1.0], AXIS[:3], AXIS[:3])


def test_hermite_functions_orthonormal():
    x = np.linspace(-12, 12, 4001)
    h = hermite_functions(8, x)
    gram = h @ h.T * (x[1] - x[0])
    assert np.allclose(gram, np.eye(8), atol=1e-10)


def test_densities_of_fock_state_agree():
    # |n> has identical position and momentum densities
    q = fock_state(4, 5).amplitudes
    x = np.linspace(-5, 5, 51)
    assert np.allclose(position_density(q, x), momentum_density(q, x), atol=1e-14)


def test_csv_layout():
    g = WignerGrid(np.array([0.0, 1.0]), np.array([2.0]), np.array([[0.5], [0.25]]))
    assert g.csv_text() == "x,p,W\n0.0,2.0,0.5\n1.0,2.0,0.25\n"
