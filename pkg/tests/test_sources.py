import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from boosted_teleport.fock import (
    FockState,
    ModeLayout,
    ModeUnitary,
    apply_mode_unitary,
    reduce_to_qubit,
    reduce_to_two_qubits,
)
from boosted_teleport.sources import (
    ANCILLA_ANGLE,
    PROBE_STATES,
    QubitSpec,
    SourceParams,
    ancilla_source,
    ancilla_state,
    ancilla_visibility,
    bell_pair_state,
    g2_zero,
    heralded_g2,
    heralded_input_state,
    photon_number_distribution,
    qubit_from_bloch,
)

from oracles import bell_pair_series, tmsv_series

S = 1 / math.sqrt(2)
A = [("a", "H"), ("a", "V")]
B = [("b", "H"), ("b", "V")]
SIGNAL = [("in", "H"), ("in", "V")]
IDLER = [("idler", "H"), ("idler", "V")]


def test_single_pair_is_psi_minus():
    state = bell_pair_state(SourceParams(0.1, 1))
    rho, _ = reduce_to_two_qubits(state, "a", "b")
    v = np.array([0, S, -S, 0])
    assert np.allclose(rho, np.outer(v, v))
    rho_a, _ = reduce_to_qubit(FockState(state.layout, {
        o: x for o, x in state.amplitudes.items() if sum(o) == 2}), "a")
    assert np.allclose(rho_a, np.eye(2) / 2)


@pytest.mark.parametrize("lam", [0.05, 0.2, 0.4])
def test_bell_pair_matches_series_oracle(lam):
    cutoff = 3
    state = bell_pair_state(SourceParams(lam, cutoff))
    oracle = bell_pair_series(lam, cutoff)
    nrm = math.sqrt(sum(abs(a) ** 2 for a in oracle.values()))
    assert state.allclose(FockState(state.layout, {o: a / nrm for o, a in oracle.items()}), atol=1e-12)
    exact = 1 / (1 - lam**2) ** 2
    assert state.discarded_weight == pytest.approx(1 - nrm**2 / exact, rel=1e-9, abs=1e-15)
    dist = photon_number_distribution(state, A + B)
    # two-pair to one-pair weight: 3 lam^4 / (2 lam^2)
    assert dist[4] / dist[2] == pytest.approx(1.5 * lam**2, rel=1e-12)


@pytest.mark.parametrize("lam", [0.05, 0.3])
def test_heralded_source_matches_series_oracle(lam):
    state = heralded_input_state(PROBE_STATES["zero"], SourceParams(lam, 4))
    oracle = tmsv_series(lam, 4)
    nrm2 = sum(a**2 for a in oracle.values())
    for n, a in oracle.items():
        assert state.amplitude((n, 0, n, 0)) == pytest.approx(a / math.sqrt(nrm2), abs=1e-13)
    dist = photon_number_distribution(state, SIGNAL)
    assert dist[2] / dist[1] == pytest.approx(lam**2, rel=1e-12)


@pytest.mark.parametrize("name", sorted(PROBE_STATES))
def test_heralded_signal_is_the_input_qubit(name):
    q = PROBE_STATES[name]
    state = heralded_input_state(q, SourceParams(0.1, 1))
    one_pair = FockState(state.layout, {o: a for o, a in state.amplitudes.items() if sum(o) == 2})
    rho, _ = reduce_to_qubit(one_pair, "in")
    assert np.real(q.vector.conj() @ rho @ q.vector) == pytest.approx(1.0, abs=1e-12)


def test_pair_parity_and_matched_numbers():
    bell = bell_pair_state(SourceParams(0.3, 3))
    assert all(sum(o) % 2 == 0 for o in bell.amplitudes)
    her = heralded_input_state(PROBE_STATES["plus_i"], SourceParams(0.3, 3))
    for occ in her.amplitudes:
        assert occ[0] + occ[1] == occ[2] + occ[3]


def test_zero_lambda_is_vacuum():
    for state in (bell_pair_state(SourceParams(0.0)), ancilla_state(SourceParams(0.0)),
                  heralded_input_state(PROBE_STATES["plus"], SourceParams(0.0))):
        assert state.amplitudes == {(0,) * len(state.layout): pytest.approx(1.0)}


def test_sources_are_normalized():
    for lam in (0.01, 0.2, 0.5):
        for state in (bell_pair_state(SourceParams(lam)), ancilla_state(SourceParams(lam)),
                      heralded_input_state(PROBE_STATES["plus"], SourceParams(lam))):
            assert state.norm() == pytest.approx(1.0, abs=1e-9)


def test_ancilla_two_photon_component():
    lam = 0.1
    state = ancilla_state(SourceParams(lam, 3))
    assert state.amplitude((2, 0)) / state.amplitude((0, 0)) == pytest.approx(lam * S)
    assert state.amplitude((0, 2)) / state.amplitude((0, 0)) == pytest.approx(-lam * S)
    assert abs(state.amplitude((1, 1))) < 1e-14
    vac = abs(state.amplitude((0, 0))) ** 2
    assert vac == pytest.approx(1 / (1 + lam**2 + lam**4 + lam**6), rel=1e-12)
    assert vac == pytest.approx(1 - lam**2, abs=2 * lam**4)


def test_ancilla_angle_is_eighth_turn():
    assert ANCILLA_ANGLE == pytest.approx(math.pi / 8)
    raw = ancilla_source(SourceParams(0.1, 1), angle=0.0)
    assert raw.amplitude((1, 1)) != 0


def test_g2_examples():
    lay = ModeLayout.dual_rail(["x"])
    with pytest.raises(ValueError):
        g2_zero(FockState(lay, {(0, 0): 1.0}), [("x", "H")])
    assert g2_zero(FockState(lay, {(1, 0): 1.0}), [("x", "H")]) == 0.0
    assert g2_zero(FockState(lay, {(2, 0): 1.0}), [("x", "H")]) == pytest.approx(0.5)


def test_unheralded_arm_is_thermal():
    state = heralded_input_state(PROBE_STATES["zero"], SourceParams(0.01, 4))
    # geometric distribution: <n(n-1)>/<n>^2 = 2
    assert g2_zero(state, SIGNAL) == pytest.approx(2.0, abs=0.01)


def test_heralded_g2_grows_with_lambda():
    values = [
        heralded_g2(heralded_input_state(PROBE_STATES["plus"], SourceParams(lam, 4)), IDLER, SIGNAL)
        for lam in np.linspace(0.01, 0.3, 8)
    ]
    assert values[0] < 1e-3
    assert all(b > a for a, b in zip(values, values[1:]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.4))
def test_g2_invariant_under_group_unitary(seed, lam):
    state = heralded_input_state(PROBE_STATES["plus"], SourceParams(lam, 3))
    u = ModeUnitary(unitary_group.rvs(2, random_state=seed), tuple(SIGNAL))
    assert g2_zero(apply_mode_unitary(state, u), SIGNAL) == pytest.approx(g2_zero(state, SIGNAL), rel=1e-9)


def test_visibility_ideal_and_admixture():
    grid = np.linspace(0, math.pi / 4, 19)
    params = SourceParams(0.05, 1)
    assert ANCILLA_ANGLE in list(grid) or min(abs(grid - ANCILLA_ANGLE)) < 1e-12
    assert ancilla_visibility(params, grid) == pytest.approx(1.0, abs=1e-12)
    vis = [ancilla_visibility(params, grid, eps) for eps in (0.0, 0.01, 0.05, 0.2)]
    assert all(b < a for a, b in zip(vis, vis[1:]))


def test_qubit_spec_validation_and_bloch():
    with pytest.raises(ValueError):
        QubitSpec(1.0, 1.0)
    q = qubit_from_bloch(math.pi / 2, math.pi / 2)
    assert np.allclose(q.vector, PROBE_STATES["plus_i"].vector)
    u = q.preparation_unitary()
    assert np.allclose(u @ [1, 0], q.vector)
    assert np.allclose(u.conj().T @ u, np.eye(2))


def test_bad_lambda_rejected():
    with pytest.raises(ValueError):
        SourceParams(1.0)
    with pytest.raises(ValueError):
        SourceParams(-0.1)
