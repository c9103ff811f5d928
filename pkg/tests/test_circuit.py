import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polargate.circuit import (
    IDEAL_DEVICE,
    MEASURED_DEVICE,
    Convention,
    DeviceDescription,
    PpdcElement,
    Rail,
    Pol,
    Routing,
    TransferMatrix,
    WaveplateElement,
    WaveplateKind,
    attenuator_from_ppdc,
    build_cnot_chip,
    mode_index,
    mode_of,
    ppdc_transfer,
    waveplate_jones,
)

fractions = st.floats(0, 1, allow_nan=False)
conventions = st.sampled_from(list(Convention))


def test_mode_indexing_bijective():
    seen = {mode_index(r, p) for r in Rail for p in Pol}
    assert seen == {0, 1, 2, 3}
    for i in range(4):
        assert mode_index(*mode_of(i)) == i
    assert mode_index(Rail.CONTROL, Pol.V) == 1 and mode_index(Rail.TARGET, Pol.H) == 2


def test_element_validation():
    with pytest.raises(ValueError):
        PpdcElement(1.2, 0.5)
    with pytest.raises(ValueError):
        PpdcElement(0.5, float("nan"))


def test_ppdc_identity_and_ppdc1_block():
    np.testing.assert_allclose(ppdc_transfer(PpdcElement(0, 0)).matrix, np.eye(4))
    u = ppdc_transfer(PpdcElement(0, 2 / 3), Convention.IMAG_CROSS).matrix
    h, v = [0, 2], [1, 3]
    np.testing.assert_allclose(u[np.ix_(h, h)], np.eye(2))
    s13, s23 = np.sqrt(1 / 3), np.sqrt(2 / 3)
    np.testing.assert_allclose(u[np.ix_(v, v)], [[s13, 1j * s23], [1j * s23, s13]])


def test_real_asym_block():
    u = ppdc_transfer(PpdcElement(0.25, 0.25), Convention.REAL_ASYM).matrix
    np.testing.assert_allclose(u[np.ix_([0, 2], [0, 2])], [[np.sqrt(0.75), 0.5], [0.5, -np.sqrt(0.75)]])


@settings(max_examples=200, deadline=None)
@given(fractions, fractions, conventions)
def test_ppdc_unitary_and_polarization_conserving(th, tv, conv):
    u = ppdc_transfer(PpdcElement(th, tv), conv).matrix
    assert np.linalg.norm(u.conj().T @ u - np.eye(4)) < 1e-12
    for i in (0, 2):
        for j in (1, 3):
            assert u[i, j] == 0 and u[j, i] == 0


@settings(max_examples=200, deadline=None)
@given(*(fractions for _ in range(6)), conventions)
def test_chip_is_subunitary_and_conserves_polarization(a, b, c, d, e, f, conv):
    m = build_cnot_chip(PpdcElement(a, b), PpdcElement(c, d), PpdcElement(e, f), conv).matrix
    assert np.linalg.svd(m, compute_uv=False).max() <= 1 + 1e-9
    h, v = [0, 2], [1, 3]
    assert np.all(m[np.ix_(h, v)] == 0) and np.all(m[np.ix_(v, h)] == 0)


@settings(max_examples=200, deadline=None)
@given(*(fractions for _ in range(6)))
def test_swapping_balancers_is_rail_relabeling(a, b, c, d, e, f):
    p1, p2, p3 = PpdcElement(a, b), PpdcElement(c, d), PpdcElement(e, f)
    swap = np.kron([[0, 1], [1, 0]], np.eye(2))
    m = build_cnot_chip(p1, p2, p3).matrix
    m_swapped = build_cnot_chip(p1, p3, p2).matrix
    np.testing.assert_allclose(swap @ m @ swap, m_swapped, atol=1e-15)
    np.testing.assert_allclose(np.linalg.svd(m, compute_uv=False), np.linalg.svd(m_swapped, compute_uv=False), atol=1e-12)


def test_attenuator_examples():
    a = attenuator_from_ppdc(PpdcElement(1 / 3, 1), Routing.CROSS)
    assert abs(a.amp_h) == pytest.approx(np.sqrt(1 / 3))
    assert abs(a.amp_v) == pytest.approx(1)
    a = attenuator_from_ppdc(PpdcElement(0, 0), Routing.BAR)
    assert a.amp_h == 1 and a.amp_v == 1
    a = attenuator_from_ppdc(PpdcElement(1, 1), Routing.BAR)
    assert a.amp_h == 0 and a.amp_v == 0
    assert attenuator_from_ppdc(PpdcElement(0.5, 0.5), Routing.CROSS, Convention.REAL_ASYM).amp_h == pytest.approx(np.sqrt(0.5))


def test_waveplates():
    hwp0 = waveplate_jones(WaveplateElement(WaveplateKind.HALF, 0.0, Rail.CONTROL))
    np.testing.assert_allclose(hwp0, np.diag([1, -1]))
    hwp = waveplate_jones(WaveplateElement(WaveplateKind.HALF, np.pi / 8, Rail.TARGET))
    np.testing.assert_allclose(hwp @ [1, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-15)
    qwp0 = waveplate_jones(WaveplateElement(WaveplateKind.QUARTER, 0.0, Rail.CONTROL))
    np.testing.assert_allclose(qwp0, np.diag([1, 1j]))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(list(WaveplateKind)), st.floats(-10, 10))
def test_waveplates_unitary(kind, angle):
    j = waveplate_jones(WaveplateElement(kind, angle, Rail.CONTROL))
    np.testing.assert_allclose(j.conj().T @ j, np.eye(2), atol=1e-12)


def test_bar_routed_null_chip_is_identity():
    z = PpdcElement(0, 0)
    m = build_cnot_chip(z, z, z, routing=(Routing.BAR, Routing.BAR))
    np.testing.assert_allclose(m.matrix, np.eye(4))


def test_ideal_chip_balance_on_control_rail():
    m = IDEAL_DEVICE.transfer().matrix
    assert np.linalg.svd(m, compute_uv=False).max() <= 1 + 1e-12
    # control-rail, bar path of PPDC1: H and V both weighted sqrt(1/3)
    assert abs(m[0, 0]) == pytest.approx(np.sqrt(1 / 3))
    assert abs(m[1, 1]) == pytest.approx(np.sqrt(1 / 3))


def test_transfer_matrix_validation():
    with pytest.raises(ValueError):
        TransferMatrix(2 * np.eye(4), unitary=False)
    with pytest.raises(ValueError):
        TransferMatrix(0.5 * np.eye(4), unitary=True)
    with pytest.raises(ValueError):
        TransferMatrix(np.eye(3))


@pytest.mark.parametrize("desc", [IDEAL_DEVICE, MEASURED_DEVICE])
def test_device_file_round_trip(desc, tmp_path):
    path = tmp_path / "dev.json"
    desc.save(path)
    back = DeviceDescription.load(path)
    assert back == desc
    assert back.dumps() == desc.dumps()
    np.testing.assert_array_equal(back.transfer().matrix, desc.transfer().matrix)


@settings(max_examples=200, deadline=None)
@given(*(fractions for _ in range(6)), conventions, st.sampled_from(list(Routing)))
def test_device_round_trip_bit_exact(a, b, c, d, e, f, conv, routing):
    desc = DeviceDescription(PpdcElement(a, b, "x", 0.01), PpdcElement(c, d, "y"), PpdcElement(e, f, "z"),
                             convention=conv, routing=(routing, Routing.CROSS))
    text = desc.dumps()
    again = DeviceDescription.loads(text)
    assert again == desc and again.dumps() == text


def test_device_file_rail_keys_reorder():
    data = MEASURED_DEVICE.to_dict()
    data["elements"] = data["elements"][::-1]
    desc = DeviceDescription.from_dict(json.loads(json.dumps(data)))
    assert desc == MEASURED_DEVICE
    assert desc.target.label == "PPDC2" and desc.control.label == "PPDC3"


def test_device_file_errors():
    with pytest.raises(ValueError, match="schema|polargate"):
        DeviceDescription.from_dict({"elements": []})
    bad = IDEAL_DEVICE.to_dict()
    del bad["elements"][0]["t_v"]
    with pytest.raises(ValueError, match="t_v"):
        DeviceDescription.from_dict(bad)
