"""Readers for the documented twinimg text outputs.

This package deliberately consumes only the stable text formats
(correlation-map CSV, SNR CSV, report JSON) and never the binary frame
files, so it stays decoupled from the analysis implementation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InputFormatError(ValueError):
    """An input file does not follow its documented schema."""


@dataclass
class CorrMapData:
    values: np.ndarray
    shifts_x: np.ndarray
    shifts_y: np.ndarray
    plane: str
    frame_count: int
    grouping: int
    physical_per_pixel: float
    axis_unit: str
    background_corrected: bool


def read_corr_csv(path: str | Path) -> CorrMapData:
    path = Path(path)
    header: dict[str, str] = {}
    rows: list[list[str]] = []
    with path.open() as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                text = line[1:].strip()
                if "=" in text:
                    key, _, value = text.partition("=")
                    header[key.strip()] = value.strip()
                continue
            if line:
                rows.append(next(csv.reader([line])))
    required = ("plane", "frame_count", "grouping", "physical_per_pixel_shift",
                "axis_unit", "background_corrected", "center_row", "center_col")
    missing = [key for key in required if key not in header]
    if missing or len(rows) < 2:
        raise InputFormatError(
            f"{path}: not a twinimg correlation map (missing {missing or 'matrix'})")
    try:
        shifts_x = np.array([int(v) for v in rows[0][1:]])
        shifts_y = np.array([int(r[0]) for r in rows[1:]])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise InputFormatError(f"{path}: malformed matrix: {exc}") from exc
    if values.shape != (len(shifts_y), len(shifts_x)):
        raise InputFormatError(f"{path}: ragged correlation matrix")
    return CorrMapData(
        values=values,
        shifts_x=shifts_x,
        shifts_y=shifts_y,
        plane=header["plane"],
        frame_count=int(header["frame_count"]),
        grouping=int(header["grouping"]),
        physical_per_pixel=float(header["physical_per_pixel_shift"]),
        axis_unit=header["axis_unit"],
        background_corrected=header["background_corrected"] == "true",
    )


def read_snr_csv(path: str | Path) -> dict[str, list[tuple[int, float]]]:
    path = Path(path)
    curves: dict[str, list[tuple[int, float]]] = {}
    with path.open() as fh:
        data_lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(data_lines)
    try:
        header = next(reader)
    except StopIteration:
        raise InputFormatError(f"{path}: empty SNR CSV") from None
    if header != ["plane", "frame_count", "snr"]:
        raise InputFormatError(f"{path}: unexpected SNR header {header}")
    for row in reader:
        if not row:
            continue
        try:
            plane, count, snr = row[0], int(row[1]), float(row[2])
        except (ValueError, IndexError) as exc:
            raise InputFormatError(f"{path}: malformed SNR row {row}") from exc
        curves.setdefault(plane, []).append((count, snr))
    if not curves:
        raise InputFormatError(f"{path}: no SNR points")
    return curves


def read_report(path: str | Path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: not JSON: {exc}") from exc
    if doc.get("schema") != "twinimg-report/1":
        raise InputFormatError(f"{path}: not a twinimg report")
    return doc
