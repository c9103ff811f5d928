"""Exact two-photon propagation through a four-mode transfer matrix.

One photon enters on each rail. Post-selection keeps events with exactly one
photon on each output rail, so the post-selected output lives in the
polarization space (control-rail pol) (x) (target-rail pol), ordered
HH, HV, VH, VV.

Two routes contribute to a coincidence: the *direct* one (control photon
stays on the control rail) and the *swap* one (both photons cross). Identical
photons add these amplitudes; distinguishable photons add their
probabilities. A partially distinguishable pair is the incoherent mixture of
the two with weight ``p`` on the distinguishable part.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from polargate.circuit import N_MODES, PpdcElement, Rail, TransferMatrix, mode_index, ppdc_transfer

ZERO_SUCCESS = 1e-15


class EmptyDistributionError(ValueError):
    """No coincidence survives post-selection."""


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(2)
    n = np.linalg.norm(v)
    if abs(n - 1) > 1e-10:
        raise ValueError(f"{name} must be unit-norm (|v| = {n:.12g})")
    return v


@dataclass(frozen=True, eq=False)
class TwoPhotonInput:
    """Polarization amplitudes of the photon pair, shape (2, 2): [control pol, target pol].

    Product inputs come from :meth:`product`; any normalized 2x2 amplitude
    array (e.g. a polarization-entangled pair) is accepted as well.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(2, 2)
        n = np.linalg.norm(a)
        if abs(n - 1) > 1e-10:
            raise ValueError(f"two-photon input must be normalized (norm {n:.12g})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def product(cls, photon_c, photon_t) -> "TwoPhotonInput":
        return cls(np.outer(_unit(photon_c, "photon_c"), _unit(photon_t, "photon_t")))

    @classmethod
    def from_vector(cls, psi) -> "TwoPhotonInput":
        """From a 4-vector over HH, HV, VH, VV."""
        return cls(np.asarray(psi, dtype=complex).reshape(2, 2))

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(4)

    @property
    def is_product(self) -> bool:
        return np.linalg.matrix_rank(self.amplitudes, tol=1e-10) <= 1


@dataclass(frozen=True)
class DistinguishabilityModel:
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"distinguishability p must lie in [0, 1], got {self.p!r}")


@dataclass(frozen=True, eq=False)
class CoincidenceDistribution:
    """Post-selected outcome probabilities over HH, HV, VH, VV plus the success probability."""

    probs: np.ndarray
    success_prob: float

    @property
    def empty(self) -> bool:
        return self.success_prob <= ZERO_SUCCESS

    @property
    def weights(self) -> np.ndarray:
        """Unnormalized outcome weights (probabilities times success)."""
        return self.probs * self.success_prob

    @classmethod
    def from_weights(cls, weights: np.ndarray) -> "CoincidenceDistribution":
        weights = np.clip(np.real(np.asarray(weights, dtype=float)), 0, None)
        total = float(weights.sum())
        if total <= ZERO_SUCCESS:
            return cls(np.zeros(4), 0.0)
        return cls(weights / total, min(total, 1.0))


def _as_matrix(m: TransferMatrix | np.ndarray) -> np.ndarray:
    return m.matrix if isinstance(m, TransferMatrix) else np.asarray(m, dtype=complex)


def route_operators(m: TransferMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direct and swap operators on the 4-dim polarization-pair space.

    ``direct[(k, l), (i, j)] = M[C k, C i] * M[T l, T j]`` and
    ``swap[(k, l), (i, j)] = M[C k, T j] * M[T l, C i]``.
    """
    mat = _as_matrix(m)
    cc = mat[0:2, 0:2]  # control in -> control out
    tt = mat[2:4, 2:4]
    ct = mat[0:2, 2:4]  # target in -> control out
    tc = mat[2:4, 0:2]  # control in -> target out
    direct = np.kron(cc, tt)
    # swap[(k,l),(i,j)] = ct[k,j] tc[l,i]: kron gives [(k,l),(j,i)], reorder input
    swap = np.kron(ct, tc).reshape(2, 2, 2, 2).transpose(0, 1, 3, 2).reshape(4, 4)
    return direct, swap


def post_selected_kraus(m: TransferMatrix | np.ndarray, p: float = 0.0) -> list[np.ndarray]:
    """Kraus operators of the (trace-decreasing) post-selected polarization map."""
    direct, swap = route_operators(m)
    ops = []
    if p < 1:
        ops.append(np.sqrt(1 - p) * (direct + swap))
    if p > 0:
        ops.extend([np.sqrt(p) * direct, np.sqrt(p) * swap])
    return ops


def post_selected_state(
    m: TransferMatrix | np.ndarray,
    inp: TwoPhotonInput | np.ndarray,
    d: DistinguishabilityModel | float = 0.0,
) -> np.ndarray:
    """Unnormalized post-selected polarization density matrix; its trace is the success probability.

    ``inp`` may also be a 4x4 input density matrix over HH, HV, VH, VV.
    """
    p = d.p if isinstance(d, DistinguishabilityModel) else float(d)
    if isinstance(inp, TwoPhotonInput):
        rho_in = np.outer(inp.vector, inp.vector.conj())
    else:
        rho_in = np.asarray(inp, dtype=complex)
    return sum(k @ rho_in @ k.conj().T for k in post_selected_kraus(m, p))


def _distribution(weights: np.ndarray) -> CoincidenceDistribution:
    return CoincidenceDistribution.from_weights(np.real(weights))


def indistinguishable_weights(m, inp: TwoPhotonInput) -> np.ndarray:
    direct, swap = route_operators(m)
    return np.abs((direct + swap) @ inp.vector) ** 2


def distinguishable_weights(m, inp: TwoPhotonInput) -> np.ndarray:
    direct, swap = route_operators(m)
    return np.abs(direct @ inp.vector) ** 2 + np.abs(swap @ inp.vector) ** 2


def evolve_indistinguishable(m: TransferMatrix | np.ndarray, inp: TwoPhotonInput) -> CoincidenceDistribution:
    return _distribution(indistinguishable_weights(m, inp))


def evolve_distinguishable(m: TransferMatrix | np.ndarray, inp: TwoPhotonInput) -> CoincidenceDistribution:
    return _distribution(distinguishable_weights(m, inp))


def mixture_weights(m, inp: TwoPhotonInput, d: DistinguishabilityModel | float) -> np.ndarray:
    p = d.p if isinstance(d, DistinguishabilityModel) else float(d)
    return (1 - p) * indistinguishable_weights(m, inp) + p * distinguishable_weights(m, inp)


def evolve_mixture(
    m: TransferMatrix | np.ndarray, inp: TwoPhotonInput, d: DistinguishabilityModel | float
) -> CoincidenceDistribution:
    return _distribution(mixture_weights(m, inp, d))


def full_output_distribution(
    m: TransferMatrix | np.ndarray, inp: TwoPhotonInput, distinguishable: bool = False
) -> dict[tuple[int, int], float]:
    """Probabilities of every output mode pair (k <= l), bunched events included.

    Sums to one for unitary ``m``. Used for conservation checks, not for gate
    analysis.
    """
    mat = _as_matrix(m)
    cin = [mode_index(Rail.CONTROL, q) for q in range(2)]
    tin = [mode_index(Rail.TARGET, q) for q in range(2)]
    # a[k, l]: amplitude of control photon in k, target photon in l
    a = mat[:, cin] @ inp.amplitudes @ mat[:, tin].T
    out = {}
    for k, l in itertools.combinations_with_replacement(range(N_MODES), 2):
        if distinguishable:
            # time-tagged photons: no interference between the two assignments
            out[(k, l)] = float(abs(a[k, l]) ** 2 + (abs(a[l, k]) ** 2 if k != l else 0.0))
        elif k == l:
            out[(k, l)] = float(2 * abs(a[k, k]) ** 2)
        else:
            out[(k, l)] = float(abs(a[k, l] + a[l, k]) ** 2)
    return out


def hom_visibility_theoretical(reflectivity: float) -> float:
    """Coincidence-dip visibility 2R(1-R) / (R^2 + (1-R)^2) of a beam splitter."""
    r = float(reflectivity)
    if not 0 < r < 1:
        raise ValueError(f"reflectivity must lie strictly between 0 and 1, got {r!r}")
    t = 1 - r
    return 2 * r * t / (r * r + t * t)


def hom_coincidence(reflectivity: float, d: DistinguishabilityModel | float = 0.0) -> float:
    """Coincidence probability for two H photons meeting on a polarization-independent splitter."""
    r = float(reflectivity)
    if not 0 <= r <= 1:
        raise ValueError(f"reflectivity must lie in [0, 1], got {r!r}")
    splitter = ppdc_transfer(PpdcElement(1 - r, 1 - r))
    h = np.array([1, 0])
    return float(mixture_weights(splitter, TwoPhotonInput.product(h, h), d).sum())


def infer_p(v_meas: float, v_theo: float) -> DistinguishabilityModel:
    """Distinguishability from measured vs ideal visibility: p = 1 - v_meas / v_theo."""
    if not 0 < v_theo <= 1:
        raise ValueError(f"theoretical visibility must lie in (0, 1], got {v_theo!r}")
    if v_meas < 0:
        raise ValueError(f"measured visibility must be non-negative, got {v_meas!r}")
    if v_meas > v_theo:
        raise ValueError(f"measured visibility {v_meas} exceeds the theoretical {v_theo}: nonphysical")
    return DistinguishabilityModel(1 - v_meas / v_theo)
