"""Simulate, characterize and design a polarization-encoded integrated CNOT gate.

Every subcommand writes a JSON report to stdout (or ``--out``). ``--shots 0``
means exact mode: probabilities are computed analytically.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from polargate import analysis, coupler, io, tomography
from polargate.circuit import (
    IDEAL_DEVICE,
    MEASURED_DEVICE,
    Convention,
    DeviceDescription,
    TransferMatrix,
)
from polargate.quantum import cnot_unitary, state_fidelity
from polargate.twophoton import (
    EmptyDistributionError,
    hom_coincidence,
    hom_visibility_theoretical,
    infer_p,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

BUILTIN_DEVICES = {"ideal": IDEAL_DEVICE, "measured": MEASURED_DEVICE}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    device: str = "ideal"
    p: float = 0.0
    shots: int = 0
    seed: int | None = None
    out: Path | None = None
    convention: Convention | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shots < 0:
            raise UsageError("--shots must be non-negative")
        if not 0 <= self.p <= 1:
            raise UsageError("--p must lie in [0, 1]")
        if self.shots > 0 and self.seed is None:
            raise UsageError("--seed is required when --shots > 0")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        known = {"command", "device", "p", "shots", "seed", "out", "convention"}
        return cls(
            subcommand=args.command,
            device=getattr(args, "device", "ideal"),
            p=getattr(args, "p", 0.0),
            shots=getattr(args, "shots", 0),
            seed=getattr(args, "seed", None),
            out=getattr(args, "out", None),
            convention=Convention(args.convention) if getattr(args, "convention", None) else None,
            options={k: v for k, v in vars(args).items() if k not in known},
        )

    def description(self) -> DeviceDescription:
        if self.device in BUILTIN_DEVICES:
            return BUILTIN_DEVICES[self.device]
        path = Path(self.device)
        if not path.exists():
            raise UsageError(f"device file {path} does not exist")
        try:
            return DeviceDescription.load(path)
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}: {exc}") from None

    def transfer(self) -> TransferMatrix:
        return analysis.cnot_device(self.description(), self.convention)


def _emit(cfg: RunConfig, report: dict) -> None:
    text = io.dumps(report)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)


def _sampled_table(tt: np.ndarray, shots: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.array([np.random.default_rng([seed, row]).multinomial(shots, tt[row] / tt[row].sum()) for row in range(4)])
    return counts / shots, counts


def cmd_truth_table(cfg: RunConfig) -> dict:
    device = cfg.transfer()
    tt = analysis.truth_table(device, cfg.p)
    report = {"device": cfg.device, "p": cfg.p, "shots": cfg.shots}
    success = analysis.success_probabilities(device, d=cfg.p)
    report["success_probabilities"] = success.tolist()
    if cfg.shots:
        tt, counts = _sampled_table(tt, cfg.shots, cfg.seed)
        report["counts"] = counts.tolist()
        correct = np.sum(tt * analysis.CNOT_TABLE, axis=1)
        report["fidelity_uncertainty"] = float(np.sqrt(np.sum(correct * (1 - correct) / cfg.shots)) / 4)
    report["truth_table"] = io.truth_table_to_json(tt)
    report["fidelity"] = analysis.truth_table_fidelity(tt)
    n_mc = cfg.options.get("propagate")
    if n_mc:
        mean, std = analysis.expected_fidelity(cfg.description(), cfg.p, n_mc, cfg.seed or 0)
        report["expected_fidelity"] = {"mean": mean, "std": std, "samples": n_mc}
    if cfg.options.get("correct"):
        if cfg.p >= 1:
            raise UsageError("--correct needs p < 1")
        tt_dist = analysis.truth_table(device, 1.0)
        success_dist = analysis.success_probabilities(device, d=1.0)
        corrected = analysis.correct_distinguishability(
            tt, tt_dist, cfg.p, success_meas=success, success_dist=success_dist
        )
        report["distinguishable_table"] = io.truth_table_to_json(tt_dist)
        report["corrected_table"] = io.truth_table_to_json(corrected)
        report["corrected_fidelity"] = analysis.truth_table_fidelity(corrected)
    return report


def cmd_bell(cfg: RunConfig) -> dict:
    device = cfg.transfer()
    gen = analysis.bell_generation(device, cfg.p)
    disc = analysis.bell_discrimination(device, cfg.p)
    return {
        "device": cfg.device,
        "p": cfg.p,
        "generation": {
            name: {
                "density_matrix": io.complex_to_json(gen.states[name]),
                "fidelity": gen.fidelities[name],
                "success_probability": gen.success_probs[name],
            }
            for name in analysis.BELL_ORDER
        },
        "mean_fidelity": gen.mean_fidelity,
        "discrimination": {
            "order": list(analysis.BELL_ORDER),
            "confusion": disc.confusion.tolist(),
            "probability": disc.probability,
        },
    }


def _write_counts(cfg: RunConfig, records) -> None:
    path = cfg.options.get("counts_out")
    if path and records:
        Path(path).write_text(io.format_counts(records))


def cmd_tomo_state(cfg: RunConfig) -> dict:
    device = cfg.transfer()
    prep = cfg.options["prep"].upper()
    st = tomography.state_tomography(device, cfg.p, prep, cfg.shots, cfg.seed)
    _write_counts(cfg, st.records)
    ideal = cnot_unitary() @ tomography.preparation_state(prep) @ cnot_unitary().conj().T
    return {
        "device": cfg.device,
        "p": cfg.p,
        "shots": cfg.shots,
        "preparation": prep,
        "raw": io.complex_to_json(st.raw),
        "density_matrix": io.complex_to_json(st.rho),
        "fidelity_to_ideal_output": state_fidelity(st.rho, ideal),
    }


def cmd_tomo_process(cfg: RunConfig) -> dict:
    device = cfg.transfer()
    res = tomography.process_tomography(device, cfg.p, cfg.shots, cfg.seed)
    records = [r for st in res.states.values() for r in (st.records or [])]
    _write_counts(cfg, records)
    ideal = tomography.chi_from_unitary(cnot_unitary())
    chi_path = cfg.options.get("chi_out")
    if chi_path:
        io.write_json(chi_path, io.chi_to_json(res.chi))
    return {
        "device": cfg.device,
        "p": cfg.p,
        "shots": cfg.shots,
        "chi": io.chi_to_json(res.chi),
        "process_fidelity": tomography.process_fidelity(res.chi, ideal),
        "max_imaginary": float(np.max(np.abs(res.chi.imag))),
    }


def cmd_hom(cfg: RunConfig) -> dict:
    r = cfg.options["reflectivity"]
    try:
        v_theo = hom_visibility_theoretical(r)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def coinc(p):
        return hom_coincidence(r, p)

    report = {
        "reflectivity": r,
        "p": cfg.p,
        "visibility_theoretical": v_theo,
        "coincidence_indistinguishable": coinc(0.0),
        "coincidence_distinguishable": coinc(1.0),
        "coincidence_at_p": coinc(cfg.p),
        "visibility_at_p": (coinc(1.0) - coinc(cfg.p)) / coinc(1.0),
    }
    v_meas = cfg.options.get("v_meas")
    if v_meas is not None:
        report["v_meas"] = v_meas
        report["inferred_p"] = infer_p(v_meas, v_theo).p
    return report


def cmd_correct(cfg: RunConfig) -> dict:
    try:
        tt_meas = io.truth_table_from_json(io.read_json(cfg.options["measured"]))
        tt_dist = io.truth_table_from_json(io.read_json(cfg.options["distinguishable"]))
    except FileNotFoundError as exc:
        raise UsageError(f"missing file: {exc.filename}") from None
    corrected = analysis.correct_distinguishability(tt_meas, tt_dist, cfg.p)
    return {
        "p": cfg.p,
        "measured_fidelity": analysis.truth_table_fidelity(tt_meas),
        "corrected_table": io.truth_table_to_json(corrected),
        "corrected_fidelity": analysis.truth_table_fidelity(corrected),
    }


def cmd_design(cfg: RunConfig) -> dict:
    path = Path(cfg.options["calibration"])
    if not path.exists():
        raise UsageError(f"calibration file {path} does not exist")
    points = io.read_calibration(path)
    fit = coupler.fit_model(points)
    window = tuple(cfg.options["window"])
    design = coupler.design_cnot_couplers(fit.model, window, cfg.options["tolerance"])
    device_path = cfg.options.get("device_out")
    if device_path:
        design.device.save(device_path)
    tt = analysis.truth_table(analysis.cnot_device(design.device), 0.0)
    return {
        "fit": fit.summary(),
        "window_mm": list(window),
        "ppdc1": vars(design.l1),
        "ppdc23": vars(design.l2),
        "device": design.device.to_dict(),
        "predicted_fidelity": analysis.truth_table_fidelity(tt),
    }


COMMANDS = {
    "design": cmd_design,
    "truth-table": cmd_truth_table,
    "bell": cmd_bell,
    "tomo-state": cmd_tomo_state,
    "tomo-process": cmd_tomo_process,
    "hom": cmd_hom,
    "correct": cmd_correct,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polargate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, device=True, sampling=True):
        if device:
            sp.add_argument("--device", default="ideal", help="device JSON file, or 'ideal' / 'measured'")
            sp.add_argument("--convention", choices=[c.value for c in Convention])
        sp.add_argument("--p", type=float, default=0.0, help="photon distinguishability")
        if sampling:
            sp.add_argument("--shots", type=int, default=0, help="shots per setting (0 = exact)")
            sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=Path, help="write the report here instead of stdout")

    sp = sub.add_parser("design", help="fit calibration data and pick coupler lengths")
    sp.add_argument("calibration", help="CSV with length_mm,t_h,t_v,sigma")
    sp.add_argument("--window", type=float, nargs=2, default=list(coupler.DEFAULT_WINDOW), metavar=("LO", "HI"))
    sp.add_argument("--tolerance", type=float, default=0.02)
    sp.add_argument("--device-out", type=Path, help="write the designed device description here")
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("truth-table", help="logical truth table and fidelity")
    common(sp)
    sp.add_argument("--correct", action="store_true", help="subtract the distinguishable contribution")
    sp.add_argument("--propagate", type=int, metavar="N", help="Monte Carlo over the transmissivity errors")

    sp = sub.add_parser("bell", help="Bell-state generation and discrimination")
    common(sp, sampling=False)

    sp = sub.add_parser("tomo-state", help="state tomography of one output")
    common(sp)
    sp.add_argument("--prep", default="DH", help="input preparation, two of H V D R (default DH = |+0>)")
    sp.add_argument("--counts-out", type=Path)

    sp = sub.add_parser("tomo-process", help="process tomography (chi matrix)")
    common(sp)
    sp.add_argument("--counts-out", type=Path)
    sp.add_argument("--chi-out", type=Path)

    sp = sub.add_parser("hom", help="Hong-Ou-Mandel visibility and distinguishability")
    common(sp, device=False, sampling=False)
    sp.add_argument("--reflectivity", type=float, default=0.5)
    sp.add_argument("--v-meas", type=float)

    sp = sub.add_parser("correct", help="correct a measured truth table for distinguishability")
    common(sp, device=False, sampling=False)
    sp.add_argument("--measured", required=True)
    sp.add_argument("--distinguishable", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = RunConfig.from_args(args)
        _emit(cfg, COMMANDS[cfg.subcommand](cfg))
    except UsageError as exc:
        print(f"polargate: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except coupler.InfeasibleDesignError as exc:
        print(f"polargate: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, EmptyDistributionError, analysis.CalibrationError) as exc:
        print(f"polargate: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
