import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qndsim.fockspace import annihilation_op, expectation, number_op, variance
from qndsim.states import (
    CatComponent,
    CatSpec,
    DegenerateSpecError,
    TruncationWarning,
    cat_superposition,
    coherent_state,
    fock_state,
    kerr_evolve,
    squeezed_coherent_state,
    uniform_fock_superposition,
)


def overlap2(a, b):
    return abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2


def test_uniform_ten_moments():
    psi = uniform_fock_superposition(10, 10)
    n = number_op(10)
    # sum n / 10 and sum n^2 / 10 - mean^2 for n = 0..9
    assert expectation(psi, n).real == pytest.approx(4.5, abs=1e-12)
    assert variance(psi, n) == pytest.approx(8.25, abs=1e-12)


def test_uniform_single_level_is_vacuum():
    assert np.array_equal(uniform_fock_superposition(1, 3).amplitudes, fock_state(0, 3).amplitudes)


def test_uniform_rejects_small_cutoff():
    with pytest.raises(ValueError):
        uniform_fock_superposition(5, 4)


def test_coherent_zero_is_vacuum():
    assert np.allclose(coherent_state(0, 12).amplitudes, fock_state(0, 12).amplitudes)


def test_coherent_recurrence_ratio():
    c = coherent_state(2.0, 30).amplitudes
    assert c[2] / c[1] == pytest.approx(2 / math.sqrt(2), rel=1e-14)


def test_coherent_population_at_mean():
    c = coherent_state(math.sqrt(50)).amplitudes
    direct = math.exp(-50 + 50 * math.log(50) - math.lgamma(51))
    assert abs(c[50]) ** 2 == pytest.approx(direct, rel=1e-10)
    assert direct == pytest.approx((2 * math.pi * 50) ** -0.5, rel=2e-3)


def test_coherent_warns_on_small_cutoff():
    with pytest.warns(TruncationWarning):
        coherent_state(4.0, 10)


def test_squeeze_zero_is_coherent():
    a = squeezed_coherent_state(1.3 + 0.4j, 0.0, 30)
    b = coherent_state(1.3 + 0.4j, 30)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-10


def test_squeezed_vacuum_photon_number():
    psi = squeezed_coherent_state(0, -0.1, 30)
    assert expectation(psi, number_op(30)).real == pytest.approx(math.sinh(0.1) ** 2, abs=1e-12)
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("s", [-0.4, 0.25])
def test_squeezed_quadrature_variance(s):
    # S^dag a S = a cosh s - a^dag sinh s, so Var x = exp(-2 s) / 2
    dim = 60
    psi = squeezed_coherent_state(0, s, dim)
    a = annihilation_op(dim)
    x = (a + a.conj().T) / math.sqrt(2)
    assert variance(psi, x) == pytest.approx(math.exp(-2 * s) / 2, abs=1e-9)


def test_ordering_changes_mean_amplitude():
    dim = 60
    a = annihilation_op(dim)
    alpha, s = 1.5, 0.3
    ds = squeezed_coherent_state(alpha, s, dim, ordering="displace_squeeze")
    sd = squeezed_coherent_state(alpha, s, dim, ordering="squeeze_displace")
    assert expectation(ds, a) == pytest.approx(alpha, abs=1e-9)
    assert expectation(sd, a) == pytest.approx(alpha * math.exp(-s), abs=1e-9)


def test_complex_displacement_mean():
    dim = 50
    psi = squeezed_coherent_state(1 - 2j, 0.0, dim)
    assert expectation(psi, annihilation_op(dim)) == pytest.approx(1 - 2j, abs=1e-9)


def test_cat_vacuum_overlap():
    spec = CatSpec.shared_squeeze([1, 1], [0, 6], 0.0)
    psi = cat_superposition(spec)
    # |<0|psi>|^2 = (1 + e^-18) / 2; the default cutoff drops ~1e-11 of the |6> tail
    expected = (1 + math.exp(-18)) / 2
    assert abs(psi.amplitudes[0]) ** 2 == pytest.approx(expected, abs=1e-10)
    # the cross term alone shifts it 7.6e-9 above one half
    assert abs(psi.amplitudes[0]) ** 2 - 0.5 == pytest.approx(math.exp(-18) / 2, rel=1e-2)


def test_single_component_cat_is_squeezed_coherent():
    spec = CatSpec((CatComponent(2.0, 1.1, -0.2),))
    a = cat_superposition(spec, 30)
    b = squeezed_coherent_state(1.1, -0.2, 30)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-12


def test_cancelling_cat_is_degenerate():
    with pytest.raises(DegenerateSpecError):
        cat_superposition(CatSpec.shared_squeeze([1, -1], [2, 2], 0.0))


def test_catspec_json_round_trip():
    spec = CatSpec((CatComponent(1 + 2j, 0.5 - 1j, -0.1), CatComponent(0.3, 2.0)))
    assert CatSpec.from_json(spec.to_json()) == spec


def test_catspec_needs_components():
    with pytest.raises(ValueError):
        CatSpec(())


def test_kerr_identity():
    psi = coherent_state(1.5, 30)
    assert np.array_equal(kerr_evolve(psi, 0.0).amplitudes, psi.amplitudes)


def test_kerr_pi_flips_amplitude():
    psi = coherent_state(1.5, 30)
    assert overlap2(kerr_evolve(psi, math.pi), coherent_state(-1.5, 30)) == pytest.approx(1, abs=1e-12)


def test_kerr_half_pi_makes_cat():
    # e^{-i pi n^2 / 2} is 1 on even n and -i on odd n
    alpha, dim = 2.0, 40
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        out = kerr_evolve(coherent_state(alpha, dim), math.pi / 2)
        cat = cat_superposition(
            CatSpec.shared_squeeze([(1 - 1j) / 2, (1 + 1j) / 2], [alpha, -alpha], 0.0), dim
        )
    assert overlap2(out, cat) == pytest.approx(1, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(-0.4, 0.4),
    st.sampled_from(["displace_squeeze", "squeeze_displace"]),
)
def test_squeezed_states_normalized(re, im, s, ordering):
    psi = squeezed_coherent_state(complex(re, im), s, 40, ordering)
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1, abs=1e-10)
