"""Binary persistence of camera frame stacks (TWIM v1).

Layout, all little-endian:

========  =====  =======================================
offset    size   field
========  =====  =======================================
0         4      magic ``b"TWIM"``
4         1      version (1)
5         1      plane (0 = near field, 1 = far field)
6         1      camera (1 or 2)
7         2      width, uint16
9         2      height, uint16
11        4      frame count, uint32
15        ...    payload: frames, row-major uint16
========  =====  =======================================

Every frame file travels with a JSON sidecar (same path plus
``.json``) carrying the fully resolved run configuration, its digest,
the seed and the unit conventions; the sidecar is what ``analyze``
trusts for geometry and thresholding.  Writing is bit-deterministic:
the sidecar has no timestamps and keys are sorted.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .camera import FrameStack
from .sampling import PlaneKind

MAGIC = b"TWIM"
VERSION = 1
_HEADER = struct.Struct("<4sBBBHHI")

_PLANE_CODE = {PlaneKind.NEAR_FIELD: 0, PlaneKind.FAR_FIELD: 1}
_PLANE_FROM_CODE = {v: k for k, v in _PLANE_CODE.items()}

UNITS = {
    "near_field_coordinate": "um (crystal plane)",
    "far_field_coordinate": "hbar/um (transverse momentum, hbar = 1)",
    "gray": "ADC units, uint16",
}


class FrameFileError(ValueError):
    """Frame file is malformed or inconsistent with its sidecar."""


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_framefile(
    path: str | Path,
    stack: FrameStack,
    camera: int,
    sidecar: dict[str, Any],
) -> Path:
    """Write a stack and its JSON sidecar; returns the binary path."""
    if camera not in (1, 2):
        raise ValueError(f"camera must be 1 or 2, got {camera}")
    frames = stack.frames
    count, height, width = frames.shape
    if width > 0xFFFF or height > 0xFFFF:
        raise FrameFileError("grid too large for the u16 header fields")
    path = Path(path)
    header = _HEADER.pack(
        MAGIC, VERSION, _PLANE_CODE[stack.plane], camera, width, height, count)
    payload = np.ascontiguousarray(frames, dtype="<u2").tobytes(order="C")
    path.write_bytes(header + payload)

    doc = dict(sidecar)
    doc.setdefault("format", f"twim/{VERSION}")
    doc.setdefault("plane", stack.plane.value)
    doc.setdefault("camera", camera)
    doc.setdefault("frame_count", count)
    doc.setdefault("units", UNITS)
    sidecar_path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_framefile(path: str | Path) -> tuple[FrameStack, int, dict[str, Any]]:
    """Read a frame file; returns (stack, camera, sidecar dict).

    A missing sidecar yields an empty metadata dict; header and payload
    sizes are always validated.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FrameFileError(f"{path}: truncated header")
    magic, version, plane_code, camera, width, height, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FrameFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FrameFileError(f"{path}: unsupported version {version}")
    if plane_code not in _PLANE_FROM_CODE:
        raise FrameFileError(f"{path}: unknown plane code {plane_code}")
    if camera not in (1, 2):
        raise FrameFileError(f"{path}: camera must be 1 or 2, got {camera}")
    expected = width * height * count * 2
    payload = blob[_HEADER.size:]
    if len(payload) != expected:
        raise FrameFileError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    frames = np.frombuffer(payload, dtype="<u2").reshape(count, height, width)
    frames = frames.astype(np.uint16)  # native order, writable

    meta: dict[str, Any] = {}
    sc_path = sidecar_path(path)
    if sc_path.exists():
        meta = json.loads(sc_path.read_text())
        if meta.get("plane") not in (None, _PLANE_FROM_CODE[plane_code].value):
            raise FrameFileError(f"{path}: sidecar plane disagrees with header")
        if meta.get("camera") not in (None, camera):
            raise FrameFileError(f"{path}: sidecar camera disagrees with header")
    stack = FrameStack(plane=_PLANE_FROM_CODE[plane_code], frames=frames, meta=dict(meta))
    return stack, camera, meta
