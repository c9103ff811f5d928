"""Two-qubit primitives: states, Pauli tensor basis, matrix square roots, fidelities.

Basis ordering is {|00>, |01>, |10>, |11>} with the control qubit as the left
tensor factor. Everything here works on plain complex numpy arrays.
"""

from __future__ import annotations

import itertools

import numpy as np

EIG_FLOOR = 1e-9
HERMITIAN_TOL = 1e-10

SIGMA_I = np.array([[1, 0], [0, 1]], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_I, SIGMA_X, SIGMA_Y, SIGMA_Z)
PAULI_LABELS = ("I", "X", "Y", "Z")

# Gamma_m = sigma_i (x) sigma_j with m = 4 i + j
PAULI_BASIS = np.array([np.kron(a, b) for a, b in itertools.product(PAULIS, PAULIS)])
PAULI_BASIS_LABELS = tuple(a + b for a, b in itertools.product(PAULI_LABELS, PAULI_LABELS))

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


class NotPhysicalError(ValueError):
    """Raised when a matrix fails a Hermitian/PSD/trace check.

    ``diagnostics`` carries the offending eigenvalues and deviations so callers
    can report what went wrong.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def pauli_index(label: str) -> int:
    """Index of a two-letter Pauli label such as ``"ZX"`` in the tensor basis."""
    return PAULI_BASIS_LABELS.index(label.upper())


def cnot_unitary() -> np.ndarray:
    """Ideal CNOT, control on the left factor."""
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = u[1, 1] = u[2, 3] = u[3, 2] = 1
    return u


def bell_states() -> dict[str, np.ndarray]:
    """The four Bell states keyed ``phi+``, ``phi-``, ``psi+``, ``psi-``."""
    r = 1 / np.sqrt(2)
    return {
        "phi+": np.array([r, 0, 0, r], dtype=complex),
        "phi-": np.array([r, 0, 0, -r], dtype=complex),
        "psi+": np.array([0, r, r, 0], dtype=complex),
        "psi-": np.array([0, r, -r, 0], dtype=complex),
    }


def ket(*factors: np.ndarray) -> np.ndarray:
    """Tensor product of single-qubit kets."""
    out = np.array([1], dtype=complex)
    for f in factors:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def hermitian_part(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2


def check_density_matrix(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Validate the density-matrix invariants; returns the matrix as complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotPhysicalError(f"{name} is not square", {"shape": rho.shape})
    if not np.all(np.isfinite(rho)):
        raise NotPhysicalError(f"{name} has non-finite entries")
    herm_dev = float(np.max(np.abs(rho - rho.conj().T)))
    if herm_dev > HERMITIAN_TOL:
        raise NotPhysicalError(f"{name} is not Hermitian", {"hermiticity_deviation": herm_dev})
    trace = complex(np.trace(rho))
    if abs(trace - 1) > HERMITIAN_TOL:
        raise NotPhysicalError(f"{name} does not have unit trace", {"trace": trace})
    evals = np.linalg.eigvalsh(hermitian_part(rho))
    if evals.min() < -EIG_FLOOR:
        raise NotPhysicalError(
            f"{name} is not positive semidefinite", {"eigenvalues": evals.tolist()}
        )
    return rho


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in [-1e-9, 0) are clipped to zero; anything more negative, or a
    non-Hermitian input, raises ``NotPhysicalError``.
    """
    m = np.asarray(m, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    herm_dev = float(np.max(np.abs(m - m.conj().T)))
    if herm_dev > 1e-9 * scale:
        raise NotPhysicalError("matrix is not Hermitian", {"hermiticity_deviation": herm_dev})
    evals, evecs = np.linalg.eigh(hermitian_part(m))
    if evals.min() < -EIG_FLOOR * scale:
        raise NotPhysicalError("matrix is indefinite", {"eigenvalues": evals.tolist()})
    return (evecs * np.sqrt(_floor(evals))) @ evecs.conj().T


def _floor(evals: np.ndarray) -> np.ndarray:
    # roundoff-level eigenvalues would otherwise contribute ~1e-9 after the square root
    evals = np.clip(evals, 0, None)
    cutoff = 1e-12 * max(float(evals.max(initial=0.0)), 1e-300)
    return np.where(evals < cutoff, 0.0, evals)


def _uhlmann(a: np.ndarray, b: np.ndarray) -> float:
    return trace_sqrt_product(a, b) ** 2


def trace_sqrt_product(a: np.ndarray, b: np.ndarray) -> float:
    """Tr sqrt(sqrt(a) b sqrt(a)) for Hermitian PSD a, b (no trace checks)."""
    sa = matrix_sqrt_psd(a)
    inner = hermitian_part(sa @ np.asarray(b, dtype=complex) @ sa)
    return float(np.sum(np.sqrt(_floor(np.linalg.eigvalsh(inner)))))


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))**2 between density matrices."""
    a = check_density_matrix(a, "a")
    b = check_density_matrix(b, "b")
    return float(min(max(_uhlmann(a, b), 0.0), 1.0))


def pure_fidelity(psi: np.ndarray, rho: np.ndarray) -> float:
    """<psi|rho|psi> for a normalized ket and a (possibly unnormalized-trace-1) state."""
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(psi.conj() @ np.asarray(rho) @ psi))


def pauli_expansion(u: np.ndarray) -> np.ndarray:
    """Coefficients c_m = Tr(Gamma_m^dagger u) / 4 so that u = sum_m c_m Gamma_m."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {u.shape}")
    return np.einsum("mji,ji->m", PAULI_BASIS.conj(), u) / 4


def random_density_matrix(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed random density matrix, handy for property tests."""
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return hermitian_part(rho / np.trace(rho).real)


def random_unitary(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
