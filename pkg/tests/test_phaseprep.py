import math

import numpy as np
import pytest
from scipy.special import gammaln

from qndsim.phaseprep import (
    REFERENCE_OPTIMA,
    UndefinedDiagnosticError,
    align_number_gauge,
    best_phase_overlap,
    binomial_floor,
    error_f,
    fidelity,
    flatness_diagnostic,
    noon_target,
    optimize_phase_prep,
    optimize_weights,
    phase_grid,
    phase_target,
    prepare_noon,
    prepare_phase,
    rescale_number_gauge,
    spec_from_quoted,
    success_probability,
)
from qndsim.projection import VirtualOscillatorState, virtual_to_joint
from qndsim.states import CatComponent, CatSpec, coherent_state, fock_state


def n_binomial(N):
    n = np.arange(N + 1)
    return np.exp(-0.5 * (gammaln(n + 1) + gammaln(N - n + 1)))


def test_noon_one_is_bell_like():
    joint = virtual_to_joint(noon_target(1), 2)
    expected = np.zeros((2, 2))
    expected[1, 0] = expected[0, 1] = 1 / math.sqrt(2)
    assert np.allclose(joint.amplitudes, expected.ravel())
    assert fidelity(noon_target(1), phase_target(1)) == pytest.approx(1, abs=1e-15)


def test_degenerate_targets_rejected():
    with pytest.raises(ValueError):
        noon_target(0)


def test_phase_target_zero():
    assert np.allclose(phase_target(3).q, [0.5] * 4)


def test_phase_grid_orthogonal():
    N = 6
    states = np.array([phase_target(N, th).q for th in phase_grid(N)])
    assert np.allclose(states.conj() @ states.T, np.eye(N + 1), atol=1e-14)


def test_free_evolution_shifts_phase():
    N, theta, shift = 5, 0.4, 1.1
    m = np.arange(N + 1)
    evolved = phase_target(N, theta).q * np.exp(1j * m * shift)
    assert np.allclose(evolved, phase_target(N, theta + shift).q)


def test_fidelity_cases():
    t = phase_target(4, 0.3)
    assert error_f(t, t) == pytest.approx(0, abs=1e-15)
    g = phase_grid(4)
    assert error_f(phase_target(4, g[1]), phase_target(4, g[3])) == pytest.approx(1, abs=1e-15)
    assert fidelity(noon_target(20), phase_target(20)) == pytest.approx(2 / 21, abs=1e-14)
    with pytest.raises(ValueError):
        fidelity(noon_target(3), phase_target(4))


def test_best_overlap_matches_dense_scan():
    rng = np.random.default_rng(5)
    q = rng.normal(size=9) + 1j * rng.normal(size=9)
    q /= np.linalg.norm(q)
    fid, theta = best_phase_overlap(q)
    thetas = np.linspace(0, 2 * np.pi, 200_001)
    m = np.arange(q.size)
    scan = np.abs(np.exp(-1j * np.outer(thetas, m)) @ q) ** 2 / q.size
    assert fid == pytest.approx(scan.max(), abs=1e-9)
    assert fid >= scan.max() - 1e-15
    assert fidelity(VirtualOscillatorState(8, q), phase_target(8, theta)) == pytest.approx(fid, abs=1e-12)


def test_noon_preparation_fidelity():
    res = prepare_noon(6.0, 20)
    assert res.fidelity >= 0.999
    assert 0 < res.probability < 1


def test_large_alpha_tail_success():
    # the |0>|0> branch always lands on N = 0 with weight |<0|c>|^4 -> 1/4
    c0 = (1 + np.exp(-32)) / math.sqrt(2 + 2 * np.exp(-32))
    assert success_probability(8.0, 10) == pytest.approx(1 - c0**4, abs=1e-9)
    assert success_probability(8.0, 1, dim=200) == pytest.approx(1 - c0**4, abs=1e-12)


def test_noon_cutoff_guard():
    with pytest.raises(ValueError):
        prepare_noon(6.0, 20, dim=30)


def test_single_coherent_phase_error_is_binomial():
    for N in (2, 5, 10):
        res = prepare_phase(CatSpec((CatComponent(1.0, 1.7),)), N)
        b = n_binomial(N)
        # positive real amplitudes: best overlap at theta = 0
        expected = 1 - b.sum() ** 2 / ((N + 1) * (b @ b))
        assert res.error_f == pytest.approx(expected, abs=1e-12)
        assert res.error_f > 0
        assert binomial_floor(N) == pytest.approx(expected, abs=1e-12)


def test_flatness_of_geometric_amplitudes():
    c = np.exp(-0.3 * np.arange(15))
    assert flatness_diagnostic(c, 10) == pytest.approx(0, abs=1e-14)


def test_flatness_of_coherent_input():
    N = 8
    b = n_binomial(N)
    expected = b.std() / b.mean()
    assert flatness_diagnostic(coherent_state(1.3, 30), N) == pytest.approx(expected, rel=1e-12)
    assert expected > 0


def test_flatness_of_fock_inputs():
    N = 6
    c = fock_state(N, N + 1).amplitudes
    assert flatness_diagnostic(c, N, fock_state(0, N + 1).amplitudes) == pytest.approx(math.sqrt(N))
    with pytest.raises(UndefinedDiagnosticError):
        flatness_diagnostic(c, N)


def test_quoted_conventions():
    native = spec_from_quoted((1.0, 2.0), -0.1)
    quad = spec_from_quoted((1.0, 2.0), -0.1, convention="quadrature")
    assert [c.alpha for c in native.components] == [1.0, 2.0]
    assert quad.components[1].alpha == pytest.approx(2 / math.sqrt(2))
    assert quad.components[0].squeeze == pytest.approx(-0.2)
    with pytest.raises(ValueError):
        spec_from_quoted((1.0,), 0.0, convention="other")


@pytest.mark.parametrize("lam", [0.6, 1.4])
def test_number_gauge_leaves_outcomes_unchanged(lam):
    spec = CatSpec((CatComponent(1.0, 0.3 + 0.4j, -0.2), CatComponent(0.5 - 0.2j, -1.1 + 0.2j, -0.2)))
    other = rescale_number_gauge(spec, lam)
    for N in (3, 9):
        a, b = prepare_phase(spec, N).outcome.q, prepare_phase(other, N).outcome.q
        assert abs(np.vdot(a, b)) == pytest.approx(1, abs=1e-12)


def test_number_gauge_requires_shared_squeeze():
    spec = CatSpec((CatComponent(1.0, 1.0, 0.1), CatComponent(1.0, 2.0, 0.2)))
    with pytest.raises(ValueError):
        rescale_number_gauge(spec, 1.1)


def test_single_component_fixed_squeeze_hits_floor():
    # with s = 0 the projected shape is N-binomial for every alpha, so the search
    # may end anywhere on the flat line; at large alpha the low-n amplitudes are
    # ~e^-|alpha|^2/2 and carry ~1e-9 relative rounding
    N = 4
    res = optimize_phase_prep(1, N, restarts=3, squeeze=0.0)
    scan = [prepare_phase(CatSpec((CatComponent(1.0, a),)), N).error_f for a in np.linspace(0.2, 4, 40)]
    assert max(scan) - min(scan) < 1e-12
    assert min(scan) == pytest.approx(binomial_floor(N), abs=1e-12)
    assert res.error_f == pytest.approx(binomial_floor(N), abs=1e-8)


def test_single_component_free_squeeze_matches_grid_scan():
    N = 4
    res = optimize_phase_prep(1, N, restarts=4)
    alphas, squeezes = np.linspace(0.05, 2.5, 50), np.linspace(-0.8, 0.8, 65)
    grid = min(
        prepare_phase(CatSpec((CatComponent(1.0, a, s),)), N).error_f for a in alphas for s in squeezes
    )
    assert res.error_f <= grid + 1e-12
    assert res.error_f > 0.5 * grid
    assert res.error_f < binomial_floor(N)


def test_two_component_local_optimum_matches_reference():
    alphas, s = REFERENCE_OPTIMA[10]
    res = optimize_phase_prep(2, 10, restarts=0, starts=[spec_from_quoted(alphas, s)])
    assert res.error_f <= 1e-4
    assert res.converged
    aligned = align_number_gauge(res.spec, alphas[0])
    assert abs(aligned.components[1].alpha - alphas[1]) < 0.2
    assert prepare_phase(aligned, 10).error_f == pytest.approx(res.error_f, rel=1e-6)


def test_weights_only_reoptimization():
    alphas, s = REFERENCE_OPTIMA[10]
    spec = spec_from_quoted(alphas, s, convention="quadrature")
    res = optimize_weights([c.alpha for c in spec.components], spec.components[0].squeeze, 10,
                           ordering="squeeze_displace")
    equal = prepare_phase(spec, 10, ordering="squeeze_displace").error_f
    assert res.error_f < equal
    assert [c.alpha for c in res.spec.components] == pytest.approx([c.alpha for c in spec.components])


def test_optimizer_is_seeded():
    a = optimize_phase_prep(2, 6, restarts=2, seed=11, max_iter=200)
    b = optimize_phase_prep(2, 6, restarts=2, seed=11, max_iter=200)
    assert a.to_json() == b.to_json()
    assert len(a.restarts) == 2
