"""File formats: calibration tables, counts records, chi matrices, truth tables, reports.

JSON floats are written with Python's shortest round-trip repr, so every
format parses back bit-exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from polargate.coupler import CalibrationDataError, CalibrationPoint
from polargate.quantum import PAULI_BASIS_LABELS
from polargate.tomography import CountsRecord

CALIBRATION_HEADER = ("length_mm", "t_h", "t_v", "sigma")
COUNTS_HEADER = ("preparation", "setting", "shots", "successes")


def read_calibration(path: str | Path) -> list[CalibrationPoint]:
    return parse_calibration(Path(path).read_text(), source=str(path))


def parse_calibration(text: str, source: str = "<calibration>") -> list[CalibrationPoint]:
    """Rows of ``length_mm, t_h, t_v, sigma``; a header row and ``#`` comments are allowed."""
    points = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or not any(cells) or cells[0].startswith("#"):
            continue
        if tuple(c.lower() for c in cells) == CALIBRATION_HEADER:
            continue
        if len(cells) != 4:
            raise CalibrationDataError(f"{source}:{lineno}: expected 4 columns, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise CalibrationDataError(f"{source}:{lineno}: non-numeric value in {row!r}") from None
        try:
            points.append(CalibrationPoint(*values))
        except ValueError as exc:
            raise CalibrationDataError(f"{source}:{lineno}: {exc}") from None
    if not points:
        raise CalibrationDataError(f"{source}: no calibration rows")
    return points


def format_calibration(points: list[CalibrationPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CALIBRATION_HEADER)
    for p in points:
        w.writerow([repr(p.length), repr(p.t_h), repr(p.t_v), repr(p.sigma)])
    return buf.getvalue()


def format_counts(records: list[CountsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_HEADER)
    for r in records:
        w.writerow([r.preparation, r.setting, r.shots, r.successes])
    return buf.getvalue()


def parse_counts(text: str) -> list[CountsRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COUNTS_HEADER:
        raise ValueError(f"counts file must start with header {','.join(COUNTS_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            prep, setting, shots, successes = row
            out.append(CountsRecord(prep, setting, int(shots), int(successes)))
        except ValueError as exc:
            raise ValueError(f"counts line {lineno}: {exc}") from None
    return out


def complex_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def complex_from_json(d: dict) -> np.ndarray:
    return np.array(d["real"], dtype=float) + 1j * np.array(d["imag"], dtype=float)


def chi_to_json(chi: np.ndarray) -> dict:
    return {"schema": "polargate.chi", "basis": list(PAULI_BASIS_LABELS), **complex_to_json(chi)}


def chi_from_json(d: dict) -> np.ndarray:
    if d.get("schema") != "polargate.chi":
        raise ValueError("not a polargate chi file")
    chi = complex_from_json(d)
    if chi.shape != (16, 16):
        raise ValueError(f"chi must be 16x16, got {chi.shape}")
    return chi


def truth_table_to_json(tt: np.ndarray) -> dict:
    return {"schema": "polargate.truth_table", "inputs": ["00", "01", "10", "11"], "rows": np.asarray(tt, dtype=float).tolist()}


def truth_table_from_json(d: dict) -> np.ndarray:
    rows = d["rows"] if isinstance(d, dict) else d
    tt = np.array(rows, dtype=float)
    if tt.shape != (4, 4):
        raise ValueError(f"truth table must be 4x4, got {tt.shape}")
    return tt


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())
