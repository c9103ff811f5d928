"""State and process tomography of the logical two-qubit output.

Tomography labels refer to logical qubit states named after the usual
polarization analysers: H = |0>, V = |1>, D = |+>, A = |->,
R = (|0> + i|1>)/sqrt2, L = (|0> - i|1>)/sqrt2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from polargate.analysis import logical_output
from polargate.circuit import TransferMatrix
from polargate.quantum import (
    PAULI_BASIS,
    hermitian_part,
    ket,
    pauli_expansion,
    projector,
    trace_sqrt_product,
)

_R = 1 / np.sqrt(2)
LOGICAL_STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_R, _R], dtype=complex),
    "A": np.array([_R, -_R], dtype=complex),
    "R": np.array([_R, 1j * _R], dtype=complex),
    "L": np.array([_R, -1j * _R], dtype=complex),
}
ANALYSER_LABELS = "HVDARL"
PREPARATION_LABELS = "HVDR"

SETTINGS: tuple[str, ...] = tuple(a + b for a, b in itertools.product(ANALYSER_LABELS, repeat=2))
PREPARATIONS: tuple[str, ...] = tuple(a + b for a, b in itertools.product(PREPARATION_LABELS, repeat=2))


class TomographyError(ValueError):
    pass


def _check_pair(label: str, allowed: str) -> str:
    label = label.upper()
    if len(label) != 2 or any(ch not in allowed for ch in label):
        raise TomographyError(f"invalid label {label!r}; expected two of {allowed}")
    return label


def label_ket(label: str) -> np.ndarray:
    label = _check_pair(label, ANALYSER_LABELS)
    return ket(LOGICAL_STATES[label[0]], LOGICAL_STATES[label[1]])


def setting_projector(setting: str) -> np.ndarray:
    return projector(label_ket(setting))


def preparation_state(prep: str) -> np.ndarray:
    """Density matrix of a product input preparation such as ``"HD"``."""
    return projector(label_ket(_check_pair(prep, PREPARATION_LABELS)))


def setting_probability(rho: np.ndarray, setting: str) -> float:
    return float(np.clip(np.real(np.trace(setting_projector(setting) @ rho)), 0.0, 1.0))


@dataclass(frozen=True)
class CountsRecord:
    preparation: str
    setting: str
    shots: int
    successes: int

    def __post_init__(self):
        if self.shots < 0 or self.successes < 0:
            raise ValueError("shots and successes must be non-negative")
        if self.successes > self.shots:
            raise ValueError(f"successes ({self.successes}) exceed shots ({self.shots})")

    @property
    def frequency(self) -> float:
        return self.successes / self.shots


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def simulate_counts(
    device: TransferMatrix, d, prep: str, setting: str, shots: int, seed
) -> CountsRecord:
    """Binomial coincidence counts for one (preparation, setting) pair.

    The success probability is the post-selected projection probability, so
    the chip's overall 1/9-type loss does not show up here.
    """
    if shots < 0:
        raise ValueError("shots must be non-negative")
    rho, _ = logical_output(device, preparation_state(prep), d)
    prob = setting_probability(rho, setting)
    successes = int(_rng(seed).binomial(shots, prob)) if shots else 0
    return CountsRecord(prep, setting, int(shots), successes)


def _state_design() -> np.ndarray:
    # a[s, m] = Tr(P_s Gamma_m) / 4 for rho = sum_m r_m Gamma_m / 4
    projs = np.array([setting_projector(s) for s in SETTINGS])
    return np.real(np.einsum("sij,mji->sm", projs, PAULI_BASIS)) / 4


_STATE_DESIGN = _state_design()


def invert_frequencies(freqs: dict[str, float]) -> np.ndarray:
    """Least-squares Pauli-vector solution from the 36 projection frequencies.

    The identity component is pinned to 1, so the result has unit trace.
    """
    missing = [s for s in SETTINGS if s not in freqs]
    if missing:
        raise TomographyError(f"missing measurement settings: {', '.join(missing)}")
    f = np.array([freqs[s] for s in SETTINGS], dtype=float)
    rhs = f - _STATE_DESIGN[:, 0]
    r, *_ = np.linalg.lstsq(_STATE_DESIGN[:, 1:], rhs, rcond=None)
    coeffs = np.concatenate([[1.0], r])
    return hermitian_part(np.einsum("m,mij->ij", coeffs, PAULI_BASIS) / 4)


def linear_inversion_state(records) -> np.ndarray:
    """Hermitian unit-trace estimate from the 36 counts records of one preparation."""
    freqs = {}
    for rec in records:
        if rec.shots <= 0:
            raise TomographyError(f"setting {rec.setting} has no shots")
        freqs[rec.setting] = rec.frequency
    return invert_frequencies(freqs)


def project_to_physical(h: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize to unit trace."""
    h = hermitian_part(h)
    evals, evecs = np.linalg.eigh(h)
    evals = np.clip(evals, 0, None)
    total = evals.sum()
    if total <= 0:
        raise TomographyError("matrix has no positive spectral weight; cannot project to a state")
    return hermitian_part((evecs * (evals / total)) @ evecs.conj().T)


@dataclass
class StateTomography:
    preparation: str
    records: list[CountsRecord] | None
    raw: np.ndarray
    rho: np.ndarray


def exact_frequencies(rho: np.ndarray) -> dict[str, float]:
    return {s: setting_probability(rho, s) for s in SETTINGS}


def state_tomography(device: TransferMatrix, d, prep: str, shots: int = 0, seed=None) -> StateTomography:
    """Reconstruct the output for one preparation; ``shots=0`` uses exact probabilities."""
    if shots == 0:
        rho, _ = logical_output(device, preparation_state(prep), d)
        raw = invert_frequencies(exact_frequencies(rho))
        return StateTomography(prep, None, raw, project_to_physical(raw))
    if seed is None:
        raise ValueError("a seed is required when shots > 0")
    prep_idx = PREPARATIONS.index(_check_pair(prep, PREPARATION_LABELS))
    records = [
        simulate_counts(device, d, prep, s, shots, [seed, prep_idx, k]) for k, s in enumerate(SETTINGS)
    ]
    raw = linear_inversion_state(records)
    return StateTomography(prep, records, raw, project_to_physical(raw))


# --- process tomography -----------------------------------------------------


def chi_from_unitary(u: np.ndarray) -> np.ndarray:
    c = pauli_expansion(u)
    return np.outer(c, c.conj())


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """E(rho) = sum_mn chi_mn Gamma_m rho Gamma_n^dagger."""
    return np.einsum("mn,mai,ij,nbj->ab", chi, PAULI_BASIS, rho, PAULI_BASIS.conj())


def _process_design(inputs: list[np.ndarray]) -> np.ndarray:
    # B[(k, a, b), (m, n)] = (Gamma_m rho_k Gamma_n^dagger)_ab
    rhos = np.array(inputs)
    b = np.einsum("mai,kij,nbj->kabmn", PAULI_BASIS, rhos, PAULI_BASIS.conj())
    return b.reshape(len(inputs) * 16, 256)


def chi_from_outputs(inputs: list[np.ndarray], outputs: list[np.ndarray]) -> np.ndarray:
    """Solve the linear map from chi to the output states of the given inputs."""
    design = _process_design(inputs)
    rhs = np.array(outputs).reshape(-1)
    if design.shape[0] == design.shape[1]:
        try:
            x = np.linalg.solve(design, rhs)
        except np.linalg.LinAlgError:
            raise TomographyError("input preparations are not informationally complete") from None
    else:
        x, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
        if rank < 256:
            raise TomographyError("input preparations are not informationally complete")
    return x.reshape(16, 16)


@dataclass
class ProcessTomography:
    chi: np.ndarray
    raw_chi: np.ndarray
    states: dict[str, StateTomography]


def process_tomography(
    device: TransferMatrix, d=0.0, shots: int = 0, seed=None, physical: bool = True
) -> ProcessTomography:
    """Reconstruct the chi matrix from the 16 product preparations.

    In exact mode each reconstructed output is weighted by its success
    probability, which recovers the post-selected map itself. With finite
    shots only normalized outputs are observable and equal weights are used.
    """
    states, outputs = {}, []
    for prep in PREPARATIONS:
        st = state_tomography(device, d, prep, shots, seed)
        states[prep] = st
        weight = logical_output(device, preparation_state(prep), d)[1] if shots == 0 else 1.0
        outputs.append(weight * (st.raw if not physical else st.rho))
    raw = chi_from_outputs([preparation_state(p) for p in PREPARATIONS], outputs)
    raw = hermitian_part(raw)
    raw = raw / np.real(np.trace(raw))
    chi = project_to_physical(raw) if physical else raw
    return ProcessTomography(chi, raw, states)


def process_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Tr[sqrt(sqrt(a) b sqrt(a))]^2 / (Tr a Tr b)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ta, tb = np.real(np.trace(a)), np.real(np.trace(b))
    if ta <= 0 or tb <= 0:
        raise ValueError("process matrices must have positive trace")
    return float(min(trace_sqrt_product(a, b) ** 2 / (ta * tb), 1.0))
