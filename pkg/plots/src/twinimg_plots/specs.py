"""Plot specifications: a small JSON format validated against a schema."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema


class PlotSpecError(ValueError):
    """Spec file is malformed; the message carries the JSON field path."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    out: Path
    corr_csv: Path | None = None
    snr_csv: Path | None = None
    report_json: Path | None = None
    title: str | None = None
    grouping_annotation: int | None = None
    color_scale: tuple[float, float] | None = None
    detect_threshold: float = 4.5


def _schema() -> dict:
    text = resources.files("twinimg_plots").joinpath("schemas/plotspec.schema.json").read_text()
    return json.loads(text)


def load_spec(path: str | Path) -> PlotSpec:
    """Parse and validate a spec file; resolve input paths relative to it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PlotSpecError(f"{path}: not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        raise PlotSpecError(f"{path}: {exc.json_path}: {exc.message}") from exc

    base = path.parent

    def resolve(key):
        return (base / doc[key]).resolve() if key in doc else None

    spec = PlotSpec(
        kind=doc["kind"],
        out=(base / doc["out"]).resolve(),
        corr_csv=resolve("corr_csv"),
        snr_csv=resolve("snr_csv"),
        report_json=resolve("report_json"),
        title=doc.get("title"),
        grouping_annotation=doc.get("grouping_annotation"),
        color_scale=tuple(doc["color_scale"]) if "color_scale" in doc else None,
        detect_threshold=doc.get("detect_threshold", 4.5),
    )
    for key, value in (("corr_csv", spec.corr_csv), ("snr_csv", spec.snr_csv),
                       ("report_json", spec.report_json)):
        if value is not None and not value.exists():
            raise PlotSpecError(f"{path}: $.{key}: input file {value} does not exist")
    return spec
