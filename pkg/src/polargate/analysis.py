"""Logical-level analysis of a simulated CNOT chip.

Encoding: control 0 -> V, 1 -> H; target 0 -> A = (H+V)/sqrt2, 1 -> D = (H-V)/sqrt2.
Truth tables are 4x4 arrays, rows = logical inputs 00, 01, 10, 11 and columns
= logical outcomes in the same order.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from polargate.circuit import (
    IDEAL_DEVICE,
    Convention,
    DeviceDescription,
    PpdcElement,
    TransferMatrix,
    local_transfer,
)
from polargate.quantum import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    bell_states,
    cnot_unitary,
    ket,
    pure_fidelity,
)
from polargate.twophoton import (
    ZERO_SUCCESS,
    DistinguishabilityModel,
    EmptyDistributionError,
    TwoPhotonInput,
    post_selected_state,
)

SQRT_HALF = 1 / np.sqrt(2)

# columns are the physical (H, V) vectors of logical |0>, |1>
CONTROL_ENCODING = np.array([[0, 1], [1, 0]], dtype=complex)
TARGET_ENCODING = np.array([[SQRT_HALF, SQRT_HALF], [SQRT_HALF, -SQRT_HALF]], dtype=complex)
ENCODING = np.kron(CONTROL_ENCODING, TARGET_ENCODING)

CNOT_TABLE = np.abs(cnot_unitary()).T ** 2  # row = input, column = output

BELL_ORDER = ("phi+", "phi-", "psi+", "psi-")
# |+-> (x) |0 1> inputs that the CNOT maps onto each Bell state
ENTANGLING_INPUTS = {
    "phi+": ket(KET_PLUS, KET_0),
    "phi-": ket(KET_MINUS, KET_0),
    "psi+": ket(KET_PLUS, KET_1),
    "psi-": ket(KET_MINUS, KET_1),
}


class CalibrationError(RuntimeError):
    pass


def _p(d) -> float:
    return d.p if isinstance(d, DistinguishabilityModel) else float(d)


def logical_input_state(c: int, t: int) -> TwoPhotonInput:
    if c not in (0, 1) or t not in (0, 1):
        raise ValueError("logical bits must be 0 or 1")
    return TwoPhotonInput.product(CONTROL_ENCODING[:, c], TARGET_ENCODING[:, t])


def logical_to_input(psi_logical) -> TwoPhotonInput:
    """Physical photon-pair amplitudes for any logical two-qubit ket."""
    return TwoPhotonInput.from_vector(ENCODING @ np.asarray(psi_logical, dtype=complex))


def logical_output(device: TransferMatrix, rho_logical, d=0.0) -> tuple[np.ndarray, float]:
    """Post-selected output in the logical basis for a logical input density matrix.

    Returns the normalized density matrix and the success probability.
    """
    rho_phys = ENCODING @ np.asarray(rho_logical, dtype=complex) @ ENCODING.conj().T
    out = post_selected_state(device, rho_phys, _p(d))
    out = ENCODING.conj().T @ out @ ENCODING
    success = float(np.real(np.trace(out)))
    if success <= ZERO_SUCCESS:
        raise EmptyDistributionError("no coincidences survive post-selection for this input")
    out = (out + out.conj().T) / 2
    return out / success, success


def logical_output_pure(device: TransferMatrix, psi_logical, d=0.0) -> tuple[np.ndarray, float]:
    psi = np.asarray(psi_logical, dtype=complex)
    return logical_output(device, np.outer(psi, psi.conj()), d)


def truth_table(device: TransferMatrix, d=0.0) -> np.ndarray:
    """Post-selected logical outcome probabilities for the four computational inputs."""
    table = np.zeros((4, 4))
    for row, (c, t) in enumerate(itertools.product((0, 1), repeat=2)):
        psi = ket((KET_0, KET_1)[c], (KET_0, KET_1)[t])
        try:
            rho, _ = logical_output_pure(device, psi, d)
        except EmptyDistributionError:
            raise EmptyDistributionError(f"device blocks logical input |{c}{t}>") from None
        table[row] = np.clip(np.real(np.diag(rho)), 0, None)
        table[row] /= table[row].sum()
    return table


COMPUTATIONAL_INPUTS = [ket((KET_0, KET_1)[c], (KET_0, KET_1)[t]) for c, t in itertools.product((0, 1), repeat=2)]


def success_probabilities(device: TransferMatrix, inputs=None, d=0.0) -> np.ndarray:
    """Success probability for each logical input ket (default: the computational basis)."""
    inputs = COMPUTATIONAL_INPUTS if inputs is None else inputs
    return np.array([logical_output_pure(device, psi, d)[1] for psi in inputs])


def truth_table_fidelity(tt: np.ndarray) -> float:
    """Mean probability of the correct CNOT outcome over the four inputs."""
    tt = np.asarray(tt, dtype=float)
    return float(np.sum(tt * CNOT_TABLE) / 4)


def check_truth_table(tt: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    tt = np.asarray(tt, dtype=float)
    if tt.shape != (4, 4):
        raise ValueError(f"truth table must be 4x4, got {tt.shape}")
    if np.any(tt < -tol) or np.any(tt > 1 + tol):
        raise ValueError("truth table entries must lie in [0, 1]")
    sums = tt.sum(axis=1)
    if np.any(np.abs(sums - 1) > tol):
        raise ValueError(f"truth table rows must sum to 1, got {sums.tolist()}")
    return tt


def correct_distinguishability(
    tt_meas, tt_dist, p: float, clip: bool = True, success_meas=None, success_dist=None
) -> np.ndarray:
    """Remove the distinguishable-photon contribution from a measured truth table.

    Each row becomes (meas - p * dist) / (1 - p); with ``clip`` negative entries
    are set to zero and the row renormalized.

    When the per-row success probabilities of the measured and the
    distinguishable runs are known, the subtraction is done on
    coincidence-rate-weighted rows instead, which is exact for a source that
    mixes at the photon-pair level.
    """
    if not 0 <= p < 1:
        raise ValueError(f"p must lie in [0, 1), got {p!r}")
    tt_meas = np.asarray(tt_meas, dtype=float)
    tt_dist = np.asarray(tt_dist, dtype=float)
    if (success_meas is None) != (success_dist is None):
        raise ValueError("pass both success_meas and success_dist, or neither")
    if success_meas is None:
        corr = (tt_meas - p * tt_dist) / (1 - p)
    else:
        s_meas = np.asarray(success_meas, dtype=float)[:, None]
        s_dist = np.asarray(success_dist, dtype=float)[:, None]
        corr = (s_meas * tt_meas - p * s_dist * tt_dist) / (1 - p)
        corr = corr / corr.sum(axis=1, keepdims=True)
    if not clip:
        return corr
    corr = np.clip(corr, 0, None)
    sums = corr.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ValueError("correction removed an entire truth-table row")
    return corr / sums


def synthesize_mixture_table(tt_ind, tt_dist, p: float) -> np.ndarray:
    """Row-wise (1 - p) * ind + p * dist: the inverse of :func:`correct_distinguishability`."""
    return (1 - p) * np.asarray(tt_ind, dtype=float) + p * np.asarray(tt_dist, dtype=float)


# --- phase compensation -----------------------------------------------------


@dataclass(frozen=True)
class PhaseCompensation:
    """diag(1, e^{i phi}) on (H, V) of each rail, before and after the chip."""

    control_in: float = 0.0
    target_in: float = 0.0
    control_out: float = 0.0
    target_out: float = 0.0

    @classmethod
    def from_array(cls, phases) -> "PhaseCompensation":
        return cls(*(float(x) for x in phases))

    def as_array(self) -> np.ndarray:
        return np.array([self.control_in, self.target_in, self.control_out, self.target_out])

    def apply(self, device: TransferMatrix) -> TransferMatrix:
        pre = local_transfer(np.diag([1, np.exp(1j * self.control_in)]), np.diag([1, np.exp(1j * self.target_in)]))
        post = local_transfer(np.diag([1, np.exp(1j * self.control_out)]), np.diag([1, np.exp(1j * self.target_out)]))
        out = post @ device @ pre
        return TransferMatrix(out.matrix, unitary=device.unitary, convention=device.convention)


@dataclass(frozen=True)
class CalibrationResult:
    convention: Convention | None
    compensation: PhaseCompensation
    mean_bell_fidelity: float


def mean_bell_fidelity(device: TransferMatrix, d=0.0) -> float:
    states = bell_states()
    total = 0.0
    for name, psi_in in ENTANGLING_INPUTS.items():
        rho, _ = logical_output_pure(device, psi_in, d)
        total += pure_fidelity(states[name], rho)
    return total / 4


def _calibrate_matrix(device: TransferMatrix) -> tuple[PhaseCompensation, float]:
    def score(phases):
        return mean_bell_fidelity(PhaseCompensation.from_array(phases).apply(device))

    grid = np.arange(4) * np.pi / 2
    best_phases, best = None, -np.inf
    for phases in itertools.product(grid, repeat=4):
        f = score(phases)
        if f > best + 1e-12:
            best_phases, best = np.array(phases), f
    if best < 1 - 1e-12:
        res = minimize(lambda x: -score(x), best_phases, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if -res.fun > best:
            best_phases, best = np.mod(res.x, 2 * np.pi), -res.fun
    return PhaseCompensation.from_array(best_phases), float(best)


def calibrate_phases(
    device: DeviceDescription | TransferMatrix, min_fidelity: float | None = 0.99
) -> CalibrationResult:
    """Pick the convention and local phases that maximize mean Bell fidelity.

    A :class:`DeviceDescription` is tried under every convention; a bare
    transfer matrix keeps its own. Raises :class:`CalibrationError` when the
    best mean fidelity stays at or below ``min_fidelity`` (pass ``None`` to
    skip the check).
    """
    if isinstance(device, DeviceDescription):
        candidates = [(c, device.transfer(c)) for c in Convention]
    else:
        candidates = [(device.convention, device)]
    best = None
    for conv, matrix in candidates:
        comp, fid = _calibrate_matrix(matrix)
        if best is None or fid > best.mean_bell_fidelity + 1e-12:
            best = CalibrationResult(conv, comp, fid)
    if min_fidelity is not None and best.mean_bell_fidelity <= min_fidelity:
        raise CalibrationError(
            f"best mean Bell fidelity {best.mean_bell_fidelity:.6f} does not exceed {min_fidelity}; "
            "the device model cannot act as a CNOT"
        )
    return best


@functools.lru_cache(maxsize=None)
def frozen_compensation(convention: Convention = Convention.IMAG_CROSS) -> PhaseCompensation:
    """Compensation calibrated once against the ideal chip, reused for real devices."""
    return calibrate_phases(IDEAL_DEVICE.transfer(Convention(convention))).compensation


def cnot_device(desc: DeviceDescription = IDEAL_DEVICE, convention: Convention | None = None) -> TransferMatrix:
    """Transfer matrix of a described chip with the frozen compensation applied."""
    conv = Convention(convention or desc.convention)
    return frozen_compensation(conv).apply(desc.transfer(conv))


# --- Bell states --------------------------------------------------------------


@dataclass
class BellGeneration:
    states: dict[str, np.ndarray]
    fidelities: dict[str, float]
    success_probs: dict[str, float]

    @property
    def mean_fidelity(self) -> float:
        return float(np.mean(list(self.fidelities.values())))


def bell_generation(device: TransferMatrix, d=0.0) -> BellGeneration:
    """Feed |+-> (x) |0 1> and compare each output to the Bell state the CNOT should make."""
    targets = bell_states()
    states, fids, succ = {}, {}, {}
    for name in BELL_ORDER:
        rho, s = logical_output_pure(device, ENTANGLING_INPUTS[name], d)
        states[name] = rho
        fids[name] = pure_fidelity(targets[name], rho)
        succ[name] = s
    return BellGeneration(states, fids, succ)


@dataclass
class BellDiscrimination:
    confusion: np.ndarray  # rows: input Bell state, columns: decoded Bell state
    probability: float


def bell_discrimination(device: TransferMatrix, d=0.0) -> BellDiscrimination:
    """Send each Bell state in and read out the product state it should map to."""
    targets = bell_states()
    outputs = {name: logical_output_pure(device, targets[name], d)[0] for name in BELL_ORDER}
    return discrimination_from_outputs(outputs)


def discrimination_from_outputs(outputs: dict[str, np.ndarray]) -> BellDiscrimination:
    """Confusion matrix given the output state for each Bell input, uniform prior."""
    confusion = np.zeros((4, 4))
    for row, name in enumerate(BELL_ORDER):
        for col, other in enumerate(BELL_ORDER):
            confusion[row, col] = pure_fidelity(ENTANGLING_INPUTS[other], outputs[name])
    confusion = np.clip(confusion, 0, None)
    confusion /= confusion.sum(axis=1, keepdims=True)
    return BellDiscrimination(confusion, float(np.mean(np.diag(confusion))))


def expected_fidelity(desc: DeviceDescription, d=0.0, samples: int = 2000, seed=0) -> tuple[float, float]:
    """Mean and spread of the truth-table fidelity under the elements' quoted errors.

    Each transmissivity is drawn from a normal law with its ``*_err`` as the
    standard deviation and clipped to [0, 1]; the frozen compensation is kept.
    """
    rng = np.random.default_rng(seed)
    comp = frozen_compensation(Convention(desc.convention))

    def jitter(e: PpdcElement) -> PpdcElement:
        th = e.t_h + (rng.normal(0, e.t_h_err) if e.t_h_err else 0.0)
        tv = e.t_v + (rng.normal(0, e.t_v_err) if e.t_v_err else 0.0)
        return PpdcElement(float(np.clip(th, 0, 1)), float(np.clip(tv, 0, 1)), e.label)

    fids = [
        truth_table_fidelity(truth_table(comp.apply(desc.with_elements(*map(jitter, desc.elements)).transfer()), d))
        for _ in range(samples)
    ]
    return float(np.mean(fids)), float(np.std(fids, ddof=1))
