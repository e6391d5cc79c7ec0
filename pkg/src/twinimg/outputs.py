"""Text outputs of the analysis: correlation-map CSVs, SNR CSV, report JSON.

These are the stable formats the plotting front end (and humans)
consume; the binary frame format lives in :mod:`twinimg.framefile`.

Correlation-map CSV: ``#``-prefixed header lines carry the provenance
(plane, frame count, grouping, flip/background flags, physical scale
per pixel shift), then a matrix whose first row and column list the
pixel shifts.  Values are written with full float precision so a
re-imported map refits to the same parameters.
"""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .analysis import EprReport
from .correlation import CorrelationMap
from .sampling import PlaneKind

_MAP_FORMAT = "twinimg-corr/1"
_SNR_FORMAT = "twinimg-snr/1"

_AXIS_UNIT = {
    PlaneKind.NEAR_FIELD: "um (crystal plane)",
    PlaneKind.FAR_FIELD: "hbar/um (transverse momentum)",
}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_corr_csv(path: str | Path, corr_map: CorrelationMap,
                   physical_per_pixel: float) -> Path:
    """Write a correlation map with headers carrying physical units."""
    path = Path(path)
    h, w = corr_map.values.shape
    buf = io.StringIO()
    buf.write(f"# {_MAP_FORMAT}\n")
    buf.write(f"# plane={corr_map.plane.value}\n")
    buf.write(f"# frame_count={corr_map.frame_count}\n")
    buf.write(f"# grouping={corr_map.grouping}\n")
    buf.write(f"# flipped={str(corr_map.flipped).lower()}\n")
    buf.write(f"# background_corrected={str(corr_map.background_corrected).lower()}\n")
    buf.write(f"# center_row={corr_map.center[0]}\n")
    buf.write(f"# center_col={corr_map.center[1]}\n")
    buf.write(f"# axis_unit={_AXIS_UNIT[corr_map.plane]}\n")
    buf.write(f"# physical_per_pixel_shift={_fmt(physical_per_pixel)}\n")
    buf.write("# values=pearson_normalized_cross_correlation\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dy_px\\dx_px"] + [str(s) for s in corr_map.shifts_x])
    for row, sy in zip(corr_map.values, corr_map.shifts_y):
        writer.writerow([str(sy)] + [_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_corr_csv(path: str | Path) -> tuple[CorrelationMap, float]:
    """Read back a correlation map; returns (map, physical_per_pixel)."""
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
    if header.get("plane") is None or not rows:
        raise ValueError(f"{path}: not a correlation map CSV")
    shifts_x = np.array([int(s) for s in rows[0][1:]])
    values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    shifts_y = np.array([int(row[0]) for row in rows[1:]])
    center = (int(header["center_row"]), int(header["center_col"]))
    if shifts_x[center[1]] != 0 or shifts_y[center[0]] != 0:
        raise ValueError(f"{path}: header center disagrees with the shift axes")
    corr_map = CorrelationMap(
        values=values,
        center=center,
        frame_count=int(header["frame_count"]),
        grouping=int(header["grouping"]),
        plane=PlaneKind.from_name(header["plane"]),
        flipped=header["flipped"] == "true",
        background_corrected=header["background_corrected"] == "true",
        meta={"source": str(path)},
    )
    return corr_map, float(header["physical_per_pixel_shift"])


def write_snr_csv(path: str | Path, report: EprReport) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# {_SNR_FORMAT}\n")
    buf.write(f"# grouping={report.meta.get('grouping')}\n")
    buf.write(f"# detect_sigma={report.meta.get('detect_sigma')}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["plane", "frame_count", "snr"])
    for plane_name, plane in (("near", report.near), ("far", report.far)):
        for count, snr in plane.snr_points:
            writer.writerow([plane_name, count, _fmt(snr)])
    path.write_text(buf.getvalue())
    return path


def read_snr_csv(path: str | Path) -> dict[str, list[tuple[int, float]]]:
    curves: dict[str, list[tuple[int, float]]] = {}
    with Path(path).open() as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        if header != ["plane", "frame_count", "snr"]:
            raise ValueError(f"{path}: unexpected SNR CSV header {header}")
        for plane_name, count, snr in reader:
            curves.setdefault(plane_name, []).append((int(count), float(snr)))
    return curves


def report_schema() -> dict[str, Any]:
    text = resources.files("twinimg").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def validate_report(doc: dict[str, Any]) -> None:
    jsonschema.validate(doc, report_schema())


def _sanitize(obj):
    """Strict-JSON form: non-finite numbers become null."""
    if isinstance(obj, dict):
        return {key: _sanitize(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(value) for value in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_report(path: str | Path, report: EprReport) -> Path:
    """Validate against the shipped schema, then write the report JSON."""
    path = Path(path)
    doc = _sanitize(json.loads(json.dumps(report.to_dict())))
    validate_report(doc)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_report(path: str | Path) -> EprReport:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != "twinimg-report/1":
        raise ValueError(f"{path}: not a twinimg report (schema tag missing)")
    validate_report(doc)
    return EprReport.from_dict(doc)
