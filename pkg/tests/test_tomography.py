import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bell_setting_probabilities, chi_by_trace_products
from polargate.analysis import cnot_device, logical_output
from polargate.circuit import DeviceDescription, PpdcElement, identity_transfer
from polargate.quantum import (
    PAULI_BASIS,
    bell_states,
    cnot_unitary,
    pauli_index,
    random_density_matrix,
    random_unitary,
)
from polargate.tomography import (
    PREPARATIONS,
    SETTINGS,
    CountsRecord,
    TomographyError,
    apply_chi,
    chi_from_unitary,
    exact_frequencies,
    invert_frequencies,
    linear_inversion_state,
    preparation_state,
    process_fidelity,
    process_tomography,
    project_to_physical,
    setting_probability,
    simulate_counts,
    state_tomography,
)

CHI_CNOT = chi_from_unitary(cnot_unitary())
SUPPORT = [pauli_index(lbl) for lbl in ("II", "IX", "ZI", "ZX")]


def test_setting_and_preparation_counts():
    assert len(set(SETTINGS)) == 36
    assert len(set(PREPARATIONS)) == 16


def test_bell_state_inversion_matches_closed_form():
    psi = bell_states()["phi+"]
    freqs = bell_setting_probabilities(psi)
    rho = invert_frequencies(freqs)
    np.testing.assert_allclose(rho, np.outer(psi, psi.conj()), atol=1e-12)


def test_maximally_mixed_inversion():
    rho = invert_frequencies(exact_frequencies(np.eye(4) / 4))
    np.testing.assert_allclose(rho, np.eye(4) / 4, atol=1e-12)


def test_missing_settings_are_listed():
    freqs = exact_frequencies(np.eye(4) / 4)
    del freqs["HV"], freqs["RL"]
    with pytest.raises(TomographyError, match="HV.*RL"):
        invert_frequencies(freqs)


def test_zero_shot_record_rejected():
    records = [CountsRecord("HH", s, 0, 0) for s in SETTINGS]
    with pytest.raises(TomographyError):
        linear_inversion_state(records)


def test_finite_shots_hermitian_unit_trace():
    st_ = state_tomography(cnot_device(), 0.0, "DH", shots=500, seed=3)
    np.testing.assert_allclose(st_.raw, st_.raw.conj().T, atol=1e-12)
    assert np.trace(st_.raw).real == pytest.approx(1, abs=1e-9)


def test_project_to_physical_clip_example():
    out = project_to_physical(np.diag([1.1, -0.1, 0, 0]).astype(complex))
    np.testing.assert_allclose(out, np.diag([1, 0, 0, 0]), atol=1e-12)


def test_project_to_physical_rejects_zero():
    with pytest.raises(TomographyError):
        project_to_physical(np.zeros((4, 4)))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_project_to_physical_idempotent_and_valid(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = a + a.conj().T + np.eye(4)
    once = project_to_physical(h)
    evals = np.linalg.eigvalsh(once)
    assert evals.min() > -1e-12
    assert np.trace(once).real == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(project_to_physical(once), once, atol=1e-12)


def test_physical_input_unchanged(rng):
    rho = random_density_matrix(rng, 4, 3)
    np.testing.assert_allclose(project_to_physical(rho), rho, atol=1e-12)


def test_simulate_counts_contracts():
    dev = cnot_device()
    a = simulate_counts(dev, 0.0, "HH", "DA", 1000, seed=11)
    b = simulate_counts(dev, 0.0, "HH", "DA", 1000, seed=11)
    assert a == b
    assert simulate_counts(dev, 0.0, "HH", "DA", 0, seed=11).successes == 0
    with pytest.raises(ValueError):
        simulate_counts(dev, 0.0, "HH", "DA", -1, seed=11)


def test_simulate_counts_zero_probability():
    dev = cnot_device()
    rho, _ = logical_output(dev, preparation_state("HH"), 0.0)
    zero = [s for s in SETTINGS if setting_probability(rho, s) < 1e-15]
    assert zero
    for s in zero:
        assert simulate_counts(dev, 0.0, "HH", s, 10_000, seed=5).successes == 0


def test_partition_of_unity(rng):
    rho = random_density_matrix(rng, 4, 4)
    freqs = exact_frequencies(rho)
    for first in "HVDARL":
        sums = [freqs[first + a] + freqs[first + b] for a, b in ("HV", "DA", "RL")]
        np.testing.assert_allclose(sums, sums[0], atol=1e-12)


def test_chi_cnot_matches_trace_products():
    np.testing.assert_allclose(CHI_CNOT, chi_by_trace_products(cnot_unitary()), atol=1e-14)


def test_ideal_process_tomography_pattern():
    res = process_tomography(cnot_device())
    chi = res.chi
    mask = np.zeros((16, 16), bool)
    mask[np.ix_(SUPPORT, SUPPORT)] = True
    np.testing.assert_allclose(np.abs(chi[mask]), 0.25, atol=1e-6)
    assert np.abs(chi[~mask]).max() < 1e-6
    assert np.abs(chi.imag).max() < 1e-9
    assert process_fidelity(chi, CHI_CNOT) >= 0.999


def test_identity_device_chi():
    chi = process_tomography(identity_transfer()).chi
    expected = np.zeros((16, 16))
    expected[0, 0] = 1
    np.testing.assert_allclose(chi, expected, atol=1e-9)


def test_cnot_vs_identity_fidelity():
    chi_i = np.zeros((16, 16))
    chi_i[0, 0] = 1
    assert process_fidelity(CHI_CNOT, chi_i) == pytest.approx(0.25, abs=1e-12)
    assert process_fidelity(CHI_CNOT, CHI_CNOT) == pytest.approx(1, abs=1e-12)


def test_process_fidelity_rejects_zero_trace():
    with pytest.raises(ValueError):
        process_fidelity(np.zeros((16, 16)), CHI_CNOT)


def test_shot_noise_convergence():
    res = process_tomography(cnot_device(), 0.0, shots=10**6, seed=1234)
    assert process_fidelity(res.chi, CHI_CNOT) >= 0.99


def _random_chi(rng):
    kraus = [random_unitary(rng) * np.sqrt(w) for w in rng.dirichlet(np.ones(3))]
    return sum(chi_from_unitary(k) for k in kraus)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 10), st.floats(0.01, 10))
def test_process_fidelity_symmetric_scale_invariant(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b = _random_chi(rng), _random_chi(rng)
    f = process_fidelity(a, b)
    assert 0 <= f <= 1
    assert process_fidelity(b, a) == pytest.approx(f, abs=1e-9)
    assert process_fidelity(alpha * a, beta * b) == pytest.approx(f, abs=1e-9)


ppdc = st.builds(
    PpdcElement,
    st.floats(0.05, 0.95),
    st.floats(0.05, 0.95),
)


@settings(max_examples=25, deadline=None)
@given(ppdc, ppdc, ppdc, st.floats(0, 1))
def test_noiseless_round_trip(p1, p2, p3, d):
    dev = DeviceDescription(p1, control=p2, target=p3).transfer()
    res = process_tomography(dev, d, physical=False)
    np.testing.assert_allclose(res.chi, res.chi.conj().T, atol=1e-9)
    for prep in PREPARATIONS:
        rho_in = preparation_state(prep)
        rho_out, _ = logical_output(dev, rho_in, d)
        sim = apply_chi(res.chi, rho_in)
        sim = sim / np.trace(sim)
        want, got = exact_frequencies(rho_out), exact_frequencies(sim)
        np.testing.assert_allclose([got[s] for s in SETTINGS], [want[s] for s in SETTINGS], atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chi_from_random_unitary_hermitian(seed):
    u = random_unitary(np.random.default_rng(seed))
    chi = chi_from_unitary(u)
    np.testing.assert_allclose(chi, chi.conj().T, atol=1e-12)
    # trace preservation: sum_mn chi_mn G_n^dag G_m = I
    tp = np.einsum("mn,nji,mjk->ik", chi, PAULI_BASIS.conj(), PAULI_BASIS)
    np.testing.assert_allclose(tp, np.eye(4), atol=1e-10)
