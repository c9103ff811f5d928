"""Directional-coupler calibration and design.

Per polarization the cross fraction follows

    T(L) = A * sin^2(pi * (L + L0) / period)

where ``L`` is the straight interaction length and ``L0`` an effective extra
length from coupling in the curved approach sections. Calibration data are
fitted per polarization; design then searches for interaction lengths that
hit a target (T_H, T_V) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from polargate.circuit import DeviceDescription, PpdcElement

PPDC1_TARGET = (0.0, 2 / 3)
PPDC23_TARGET = (1 / 3, 1.0)
DEFAULT_WINDOW = (5.6, 8.2)


class CalibrationDataError(ValueError):
    pass


class InfeasibleDesignError(RuntimeError):
    pass


@dataclass(frozen=True)
class CouplerCurve:
    amplitude: float
    period: float
    offset: float = 0.0

    def __post_init__(self):
        if not 0 < self.amplitude <= 1:
            raise ValueError(f"amplitude must lie in (0, 1], got {self.amplitude!r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")

    def __call__(self, length):
        return self.amplitude * np.sin(np.pi * (np.asarray(length, dtype=float) + self.offset) / self.period) ** 2

    def canonical(self) -> "CouplerCurve":
        """Same curve with the offset reduced into [0, period)."""
        return CouplerCurve(self.amplitude, self.period, float(np.mod(self.offset, self.period)))

    def as_array(self) -> np.ndarray:
        return np.array([self.amplitude, self.period, self.offset])


@dataclass(frozen=True)
class SinusoidalCouplerModel:
    h: CouplerCurve
    v: CouplerCurve


def predict(model: SinusoidalCouplerModel, length):
    """Cross fractions (t_h, t_v) at interaction length(s) ``length`` in mm."""
    if np.any(np.asarray(length) < 0):
        raise ValueError("interaction length must be non-negative")
    return model.h(length), model.v(length)


@dataclass(frozen=True)
class CalibrationPoint:
    length: float
    t_h: float
    t_v: float
    sigma: float

    def __post_init__(self):
        if self.length < 0:
            raise ValueError(f"interaction length must be non-negative, got {self.length!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


@dataclass
class CurveFit:
    curve: CouplerCurve
    chi2: float
    dof: int
    stderr: np.ndarray  # amplitude, period, offset

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


@dataclass
class FitReport:
    model: SinusoidalCouplerModel
    h: CurveFit
    v: CurveFit

    def summary(self) -> dict:
        out = {}
        for name, fit in (("h", self.h), ("v", self.v)):
            out[name] = {
                "amplitude": fit.curve.amplitude,
                "period_mm": fit.curve.period,
                "offset_mm": fit.curve.offset,
                "stderr": fit.stderr.tolist(),
                "chi2": fit.chi2,
                "dof": fit.dof,
                "reduced_chi2": fit.reduced_chi2,
            }
        return out


def _grid_search(x, y, w, period_bounds, n_phase=64, top=6):
    span = x.max() - x.min()
    f_lo, f_hi = 1 / period_bounds[1], 1 / period_bounds[0]
    n_f = int(min(max(40 * (f_hi - f_lo) * span, 200), 20000))
    freqs = np.linspace(f_lo, f_hi, n_f)
    phases = np.arange(n_phase) * np.pi / n_phase
    # sin^2(u + phi) = (1 - cos(2u) cos(2phi) + sin(2u) sin(2phi)) / 2, so every
    # weighted sum over samples reduces to a few (freq,) moments
    arg = 2 * np.pi * freqs[:, None] * x[None, :]
    c, sn = np.cos(arg), np.sin(arg)
    cp, sp = np.cos(2 * phases)[None, :], np.sin(2 * phases)[None, :]

    def m(v):
        return (v @ w)[:, None]

    wy, wyy, w1 = np.sum(w * y), np.sum(w * y * y), np.sum(w)
    sy = (wy - m(c * y) * cp + m(sn * y) * sp) / 2
    wc, ws, wcc, wss, wcs = m(c), m(sn), m(c * c), m(sn * sn), m(c * sn)
    ss = (w1 - 2 * wc * cp + 2 * ws * sp + wcc * cp**2 + wss * sp**2 - 2 * wcs * cp * sp) / 4
    amp = np.clip(sy / np.where(ss > 0, ss, np.inf), 1e-6, 1.0)
    sse = wyy - 2 * amp * sy + amp**2 * ss
    # best phase per frequency, then the lowest few local minima in frequency
    k_best = np.argmin(sse, axis=1)
    profile = sse[np.arange(n_f), k_best]
    minima = [i for i in range(n_f) if (i == 0 or profile[i] <= profile[i - 1]) and (i == n_f - 1 or profile[i] <= profile[i + 1])]
    minima.sort(key=lambda i: (profile[i], i))
    starts = []
    for i in minima[:top]:
        period = 1 / freqs[i]
        starts.append(np.array([amp[i, k_best[i]], period, phases[k_best[i]] * period / np.pi]))
    return starts


def _refine(x, y, sigma, start, period_bounds):
    def resid(theta):
        a, period, off = theta
        return (a * np.sin(np.pi * (x + off) / period) ** 2 - y) / sigma

    lo = [1e-9, period_bounds[0] * 0.9, -np.inf]
    hi = [1.0, period_bounds[1] * 1.1, np.inf]
    start = np.clip(start, np.array(lo) + 1e-12, np.array(hi) - 1e-12) if start[0] < 1 else start
    res = least_squares(resid, start, bounds=(lo, hi), method="trf", x_scale="jac",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
    return res


def fit_curve(lengths, values, sigma, period_bounds: tuple[float, float] | None = None) -> CurveFit:
    """Weighted least-squares fit of one polarization's transmission curve.

    A coarse grid over (period, offset) with the amplitude solved in closed
    form picks candidate basins; each is refined by bounded least squares and
    the lowest chi^2 wins.
    """
    x = np.asarray(lengths, dtype=float)
    y = np.asarray(values, dtype=float)
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), x.shape)
    if len(np.unique(x)) < 5:
        raise CalibrationDataError("need at least 5 distinct interaction lengths per polarization")
    if np.ptp(y) <= max(2 * float(np.min(sig)), 1e-12):
        raise CalibrationDataError("no oscillation observable: transmission is flat within the uncertainties")
    if period_bounds is None:
        ux = np.unique(x)
        spacing = float(np.min(np.diff(ux)))
        period_bounds = (3 * spacing, 2 * float(np.ptp(ux)))
    w = 1 / sig**2

    best = None
    for start in _grid_search(x, y, w, period_bounds):
        res = _refine(x, y, sig, start, period_bounds)
        if best is None or res.cost < best.cost - 1e-15:
            best = res
    a, period, off = best.x
    curve = CouplerCurve(float(min(a, 1.0)), float(period), float(off)).canonical()
    chi2 = float(2 * best.cost)
    try:
        cov = np.linalg.inv(best.jac.T @ best.jac)
        stderr = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        stderr = np.full(3, np.nan)
    return CurveFit(curve, chi2, len(x) - 3, stderr)


def fit_model(points: list[CalibrationPoint], period_bounds: tuple[float, float] | None = None) -> FitReport:
    if not points:
        raise CalibrationDataError("no calibration points")
    lengths = np.array([p.length for p in points])
    sig = np.array([p.sigma for p in points])
    fits = {}
    for name in ("h", "v"):
        values = np.array([getattr(p, f"t_{name}") for p in points])
        try:
            fits[name] = fit_curve(lengths, values, sig, period_bounds)
        except CalibrationDataError as exc:
            raise CalibrationDataError(f"{name.upper()} polarization: {exc}") from None
    return FitReport(SinusoidalCouplerModel(fits["h"].curve, fits["v"].curve), fits["h"], fits["v"])


@dataclass(frozen=True)
class DesignTarget:
    t_h: float
    t_v: float
    tolerance: float = 0.01
    window: tuple[float, float] = DEFAULT_WINDOW

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class LengthSolution:
    length: float
    t_h: float
    t_v: float
    residual: float


def _residual(model, target, length):
    th, tv = predict(model, length)
    return np.maximum(np.abs(th - target.t_h), np.abs(tv - target.t_v))


def solve_length(model: SinusoidalCouplerModel, target: DesignTarget, step: float | None = None) -> list[LengthSolution]:
    """All local minima of max(|dT_H|, |dT_V|) in the window within tolerance.

    Sorted by residual, ties broken by the shorter length.
    """
    lo, hi = target.window
    if not (0 <= lo < hi):
        raise InfeasibleDesignError(f"empty or invalid search window [{lo}, {hi}]")
    step = step or min(model.h.period, model.v.period) / 4000
    grid = np.linspace(lo, hi, max(int(math.ceil((hi - lo) / step)) + 1, 3))
    r = _residual(model, target, grid)
    found: list[LengthSolution] = []
    for i in range(len(grid)):
        left = r[i - 1] if i > 0 else np.inf
        right = r[i + 1] if i < len(grid) - 1 else np.inf
        if not (r[i] <= left and r[i] <= right):
            continue
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        opt = minimize_scalar(lambda L: float(_residual(model, target, L)), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        length, res = (float(opt.x), float(opt.fun)) if opt.fun <= r[i] else (float(grid[i]), float(r[i]))
        if res > target.tolerance:
            continue
        if any(abs(s.length - length) < 1e-6 for s in found):
            continue
        th, tv = predict(model, length)
        found.append(LengthSolution(length, float(th), float(tv), res))
    found.sort(key=lambda s: (s.residual, s.length))
    return found


@dataclass
class CouplerDesign:
    l1: LengthSolution
    l2: LengthSolution
    device: DeviceDescription


def design_cnot_couplers(
    model: SinusoidalCouplerModel,
    window: tuple[float, float] = DEFAULT_WINDOW,
    tolerance: float = 0.02,
) -> CouplerDesign:
    """Interaction lengths for PPDC1 (0, 2/3) and PPDC2/3 (1/3, 1), with the resulting device."""
    picks = []
    for name, (th, tv) in (("PPDC1", PPDC1_TARGET), ("PPDC2/3", PPDC23_TARGET)):
        sols = solve_length(model, DesignTarget(th, tv, tolerance, window))
        if not sols:
            raise InfeasibleDesignError(
                f"no interaction length in [{window[0]}, {window[1]}] mm reaches {name} target "
                f"(T_H={th:.4f}, T_V={tv:.4f}) within {tolerance}"
            )
        picks.append(sols[0])
    l1, l2 = picks
    device = DeviceDescription(
        PpdcElement(l1.t_h, l1.t_v, "PPDC1"),
        PpdcElement(l2.t_h, l2.t_v, "PPDC2"),
        PpdcElement(l2.t_h, l2.t_v, "PPDC3"),
        metadata={"interaction_length_mm": {"PPDC1": l1.length, "PPDC2": l2.length, "PPDC3": l2.length}},
    )
    return CouplerDesign(l1, l2, device)


def anchored_model(
    l1: float = 7.4, l2: float = 7.0, amplitude_h: float = 0.95, amplitude_v: float = 1.0
) -> SinusoidalCouplerModel:
    """Synthetic model with T(l1) = (0, 2/3) and T(l2) = (1/3, 1).

    Stand-in for digitized calibration data: each curve is pinned by the two
    design points. ``amplitude_h < 1`` keeps the H and V periods distinct.
    """
    gap = abs(l1 - l2)
    # H: zero at l1, 1/3 at l2 a distance `gap` away
    period_h = math.pi * gap / math.asin(math.sqrt(PPDC23_TARGET[0] / amplitude_h))
    offset_h = -l1
    # V: peak at l2, 2/3 at l1
    if amplitude_v < PPDC23_TARGET[1]:
        raise ValueError("V amplitude must reach T_V = 1")
    period_v = math.pi * gap / math.acos(math.sqrt(PPDC1_TARGET[1] / amplitude_v))
    offset_v = period_v / 2 - l2
    return SinusoidalCouplerModel(
        CouplerCurve(amplitude_h, period_h, offset_h).canonical(),
        CouplerCurve(amplitude_v, period_v, offset_v).canonical(),
    )


# two sampling windows: 0-2 mm for the beat-length difference, 5.6-8.2 mm around the design point
CALIBRATION_LENGTHS = np.round(np.concatenate([np.arange(0, 2.01, 0.1), np.arange(5.6, 8.21, 0.1)]), 10)


def synthetic_calibration(
    model: SinusoidalCouplerModel,
    lengths=CALIBRATION_LENGTHS,
    sigma: float = 0.01,
    noise: float = 0.0,
    seed=None,
) -> list[CalibrationPoint]:
    """Calibration points sampled from ``model``, optionally with Gaussian noise of std ``noise``."""
    rng = np.random.default_rng(seed)
    lengths = np.asarray(lengths, dtype=float)
    th, tv = predict(model, lengths)
    if noise:
        th = th + rng.normal(0, noise, th.shape)
        tv = tv + rng.normal(0, noise, tv.shape)
    return [CalibrationPoint(float(L), float(a), float(b), sigma) for L, a, b in zip(lengths, th, tv)]
