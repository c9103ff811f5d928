"""Transfer matrices for polarization-sensitive integrated optics.

Four optical modes are tracked, indexed ``2 * rail + polarization`` with
rails (control, target) and polarizations (H, V):

    0: (C, H)   1: (C, V)   2: (T, H)   3: (T, V)

A coupler's transmissivity ``T`` is the power fraction that crosses to the
other waveguide. The two dump ports of the balancing couplers are not
simulated as modes; their effect is folded into sub-unitary per-rail
attenuators, which is equivalent under coincidence post-selection.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_MODES = 4
UNITARY_TOL = 1e-9


class Rail(enum.IntEnum):
    CONTROL = 0
    TARGET = 1


class Pol(enum.IntEnum):
    H = 0
    V = 1


class Convention(str, enum.Enum):
    """Beam-splitter amplitude convention for a lossless 2x2 coupler block."""

    IMAG_CROSS = "imag_cross"  # [[r, i t], [i t, r]]
    REAL_ASYM = "real_asym"  # [[r, t], [t, -r]]


class Routing(str, enum.Enum):
    BAR = "bar"
    CROSS = "cross"


def mode_index(rail: Rail | int, pol: Pol | int) -> int:
    return 2 * int(rail) + int(pol)


def mode_of(index: int) -> tuple[Rail, Pol]:
    if not 0 <= index < N_MODES:
        raise IndexError(f"mode index {index} out of range")
    return Rail(index // 2), Pol(index % 2)


def _check_fraction(name: str, value: float) -> None:
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class PpdcElement:
    """Partially polarizing directional coupler, described by its cross fractions."""

    t_h: float
    t_v: float
    label: str = ""
    t_h_err: float | None = None
    t_v_err: float | None = None

    def __post_init__(self):
        _check_fraction("t_h", self.t_h)
        _check_fraction("t_v", self.t_v)


@dataclass(frozen=True)
class PolarizationAttenuator:
    amp_h: complex
    amp_v: complex

    def __post_init__(self):
        for name in ("amp_h", "amp_v"):
            if abs(getattr(self, name)) > 1 + UNITARY_TOL:
                raise ValueError(f"|{name}| exceeds 1")

    def jones(self) -> np.ndarray:
        return np.diag([self.amp_h, self.amp_v]).astype(complex)


class WaveplateKind(str, enum.Enum):
    HALF = "half"
    QUARTER = "quarter"


@dataclass(frozen=True)
class WaveplateElement:
    kind: WaveplateKind
    angle: float
    rail: Rail

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValueError("waveplate angle must be finite")


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Single-photon scattering matrix over the four modes.

    ``unitary=False`` marks matrices with folded-in loss; for those only the
    singular values are bounded by one.
    """

    matrix: np.ndarray
    unitary: bool = True
    convention: Convention | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (N_MODES, N_MODES):
            raise ValueError(f"transfer matrix must be {N_MODES}x{N_MODES}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("transfer matrix has non-finite entries")
        smax = np.linalg.svd(m, compute_uv=False).max()
        if smax > 1 + UNITARY_TOL:
            raise ValueError(f"largest singular value {smax:.12g} exceeds 1")
        if self.unitary:
            dev = np.linalg.norm(m.conj().T @ m - np.eye(N_MODES))
            if dev > UNITARY_TOL:
                raise ValueError(f"matrix flagged unitary but ||U^dag U - I|| = {dev:.3g}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix(
            self.matrix @ other.matrix,
            unitary=self.unitary and other.unitary,
            convention=self.convention or other.convention,
        )

    def with_global_phase(self, phase: float) -> "TransferMatrix":
        return TransferMatrix(self.matrix * np.exp(1j * phase), self.unitary, self.convention)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


def identity_transfer() -> TransferMatrix:
    return TransferMatrix(np.eye(N_MODES))


def coupler_block(t: float, convention: Convention) -> np.ndarray:
    """2x2 rail block for one polarization with cross fraction ``t``."""
    r, c = math.sqrt(1 - t), math.sqrt(t)
    if Convention(convention) is Convention.IMAG_CROSS:
        return np.array([[r, 1j * c], [1j * c, r]], dtype=complex)
    return np.array([[r, c], [c, -r]], dtype=complex)


def ppdc_transfer(e: PpdcElement, convention: Convention = Convention.IMAG_CROSS) -> TransferMatrix:
    """Polarization-conserving coupler between the two rails."""
    u = np.zeros((N_MODES, N_MODES), dtype=complex)
    for pol, t in ((Pol.H, e.t_h), (Pol.V, e.t_v)):
        idx = [mode_index(Rail.CONTROL, pol), mode_index(Rail.TARGET, pol)]
        u[np.ix_(idx, idx)] = coupler_block(t, convention)
    return TransferMatrix(u, unitary=True, convention=Convention(convention))


def attenuator_from_ppdc(
    e: PpdcElement,
    used_port: Routing = Routing.CROSS,
    convention: Convention = Convention.IMAG_CROSS,
) -> PolarizationAttenuator:
    """Amplitudes surviving into ``used_port`` when one input of ``e`` is lit.

    Whatever leaves through the other port is dumped and never detected.
    """
    if Routing(used_port) is Routing.BAR:
        return PolarizationAttenuator(math.sqrt(1 - e.t_h), math.sqrt(1 - e.t_v))
    phase = 1j if Convention(convention) is Convention.IMAG_CROSS else 1.0
    return PolarizationAttenuator(phase * math.sqrt(e.t_h), phase * math.sqrt(e.t_v))


def attenuator_transfer(control: PolarizationAttenuator, target: PolarizationAttenuator) -> TransferMatrix:
    m = np.zeros((N_MODES, N_MODES), dtype=complex)
    m[:2, :2] = control.jones()
    m[2:, 2:] = target.jones()
    return TransferMatrix(m, unitary=False)


def waveplate_jones(w: WaveplateElement) -> np.ndarray:
    """Jones matrix in the (H, V) basis, fast axis at ``angle`` from H.

    The half-wave plate uses the reflection form [[c2, s2], [s2, -c2]]; the
    quarter-wave plate is R(-angle) diag(1, i) R(angle).
    """
    th = w.angle
    if WaveplateKind(w.kind) is WaveplateKind.HALF:
        c2, s2 = math.cos(2 * th), math.sin(2 * th)
        return np.array([[c2, s2], [s2, -c2]], dtype=complex)
    c, s = math.cos(th), math.sin(th)
    rot = np.array([[c, s], [-s, c]], dtype=complex)
    return rot.T @ np.diag([1, 1j]) @ rot


def local_transfer(control: np.ndarray | None = None, target: np.ndarray | None = None) -> TransferMatrix:
    """Block-diagonal transfer matrix from per-rail 2x2 Jones matrices."""
    m = np.zeros((N_MODES, N_MODES), dtype=complex)
    m[:2, :2] = np.eye(2) if control is None else control
    m[2:, 2:] = np.eye(2) if target is None else target
    unitary = np.allclose(m.conj().T @ m, np.eye(N_MODES), atol=UNITARY_TOL)
    return TransferMatrix(m, unitary=unitary)


def waveplate_transfer(w: WaveplateElement) -> TransferMatrix:
    j = waveplate_jones(w)
    if Rail(w.rail) is Rail.CONTROL:
        return local_transfer(control=j)
    return local_transfer(target=j)


def build_cnot_chip(
    p1: PpdcElement,
    p2: PpdcElement,
    p3: PpdcElement,
    convention: Convention = Convention.IMAG_CROSS,
    routing: tuple[Routing, Routing] = (Routing.CROSS, Routing.CROSS),
) -> TransferMatrix:
    """Three-coupler CNOT layout: ``(A2 (+) A3) . U1``.

    ``p1`` is where the photons interfere; ``p2`` and ``p3`` balance the H and
    V amplitudes on the control and target rails respectively.
    """
    convention = Convention(convention)
    u1 = ppdc_transfer(p1, convention)
    a2 = attenuator_from_ppdc(p2, routing[0], convention)
    a3 = attenuator_from_ppdc(p3, routing[1], convention)
    chip = attenuator_transfer(a2, a3) @ u1
    return TransferMatrix(chip.matrix, unitary=False, convention=convention)


IDEAL_PPDC1 = PpdcElement(0.0, 2 / 3, "PPDC1")
IDEAL_PPDC2 = PpdcElement(1 / 3, 1.0, "PPDC2")
IDEAL_PPDC3 = PpdcElement(1 / 3, 1.0, "PPDC3")

# characterized chip; T_H^(1) was only bounded (< 1 %) and is taken as 0
MEASURED_PPDC1 = PpdcElement(0.0, 0.64, "PPDC1", t_h_err=0.01, t_v_err=0.01)
MEASURED_PPDC2 = PpdcElement(0.43, 0.98, "PPDC2", t_h_err=0.01, t_v_err=0.01)
MEASURED_PPDC3 = PpdcElement(0.27, 0.93, "PPDC3", t_h_err=0.01, t_v_err=0.01)


# --- device description files -------------------------------------------

DEVICE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DeviceDescription:
    """A three-coupler CNOT chip: the interfering coupler and the two rail balancers.

    The balancers are stored by the rail they sit on, independent of their
    labels, plus the output port (bar or cross) each one is read from.
    """

    ppdc1: PpdcElement
    control: PpdcElement
    target: PpdcElement
    convention: Convention = Convention.IMAG_CROSS
    routing: tuple[Routing, Routing] = (Routing.CROSS, Routing.CROSS)
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def elements(self) -> tuple[PpdcElement, PpdcElement, PpdcElement]:
        return (self.ppdc1, self.control, self.target)

    def transfer(self, convention: Convention | None = None) -> TransferMatrix:
        return build_cnot_chip(*self.elements, convention=convention or self.convention, routing=self.routing)

    def with_elements(self, ppdc1: PpdcElement, control: PpdcElement, target: PpdcElement) -> "DeviceDescription":
        return DeviceDescription(ppdc1, control, target, self.convention, self.routing, self.metadata)

    def to_dict(self) -> dict:
        elements = []
        for e, rail, routing in zip(self.elements, ("both", "control", "target"), (None, *self.routing)):
            d = {"label": e.label, "rail": rail, "t_h": e.t_h, "t_v": e.t_v, "t_h_err": e.t_h_err, "t_v_err": e.t_v_err}
            d["routing"] = "coupler" if routing is None else Routing(routing).value
            elements.append(d)
        out = {
            "schema": "polargate.device",
            "version": DEVICE_SCHEMA_VERSION,
            "convention": Convention(self.convention).value,
            "elements": elements,
        }
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceDescription":
        if data.get("schema") != "polargate.device":
            raise ValueError("not a polargate device description")
        elements = data.get("elements")
        if not isinstance(elements, list) or len(elements) != 3:
            raise ValueError("device description needs exactly three elements")
        by_rail = {}
        for i, d in enumerate(elements):
            try:
                e = PpdcElement(
                    float(d["t_h"]),
                    float(d["t_v"]),
                    str(d.get("label", "")),
                    None if d.get("t_h_err") is None else float(d["t_h_err"]),
                    None if d.get("t_v_err") is None else float(d["t_v_err"]),
                )
            except KeyError as exc:
                raise ValueError(f"element {i} is missing field {exc.args[0]!r}") from None
            rail = d.get("rail", ("both", "control", "target")[i])
            if rail in by_rail:
                raise ValueError(f"two elements claim rail {rail!r}")
            by_rail[rail] = (e, d.get("routing", "coupler" if rail == "both" else "cross"))
        if set(by_rail) != {"both", "control", "target"}:
            raise ValueError("elements must cover rails 'both', 'control' and 'target'")
        return cls(
            by_rail["both"][0],
            by_rail["control"][0],
            by_rail["target"][0],
            convention=Convention(data.get("convention", Convention.IMAG_CROSS.value)),
            routing=(Routing(by_rail["control"][1]), Routing(by_rail["target"][1])),
            metadata=data.get("metadata", {}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DeviceDescription":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "DeviceDescription":
        return cls.loads(Path(path).read_text())


IDEAL_DEVICE = DeviceDescription(IDEAL_PPDC1, IDEAL_PPDC2, IDEAL_PPDC3)
# the truth table pins the (43 %, 98 %) balancer to the target rail
MEASURED_DEVICE = DeviceDescription(MEASURED_PPDC1, control=MEASURED_PPDC3, target=MEASURED_PPDC2)
