"""fft-1 far-field archives and the exports of indicator fields and reports.

An fft-1 archive is one JSON document:

    {"format": "fft-1", "angles_deg": [...], "wavenumbers": [...], "directions_deg": [...],
     "noise": {"delta": .., "seed": ..} | null, "provenance": {...}, "data": [[re, im], ...]}

with ``data`` flattened n-outer, m-middle, l-inner and every real written with 17
significant digits.
"""
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from scatter_workbench.errors import ArchiveError
from scatter_workbench.ForwardSolver import FarFieldTensor
from scatter_workbench.SamplingIndicators import IndicatorField, normalize

logger = logging.getLogger(__name__)

ARCHIVE_FORMAT = "fft-1"
PathLike = Union[str, Path]


def _real(x: float) -> str:
    value = float(x)
    if not np.isfinite(value):
        raise ArchiveError(f"cannot archive non-finite value {value}")
    text = format(value, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def _reals(values) -> str:
    return "[" + ", ".join(_real(v) for v in np.ravel(values)) + "]"


def canonical_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def config_hash(document: Any) -> str:
    """sha256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(document).encode("utf-8")).hexdigest()


def _degrees(radians: np.ndarray, recorded: Optional[np.ndarray]) -> np.ndarray:
    if recorded is not None and np.array_equal(np.radians(recorded), radians):
        return recorded
    return np.degrees(radians)


def dumps_archive(tensor: FarFieldTensor) -> str:
    values = tensor.values.transpose(2, 1, 0).ravel()
    pairs = ", ".join(f"[{_real(v.real)}, {_real(v.imag)}]" for v in values)
    noise = json.dumps(tensor.noise, sort_keys=True) if tensor.noise is not None else "null"
    provenance = json.dumps(tensor.provenance, sort_keys=True, default=str)
    angles_deg, directions_deg = tensor.axes_deg or (None, None)
    return (
        "{"
        f'"format": "{ARCHIVE_FORMAT}", '
        f'"angles_deg": {_reals(_degrees(tensor.angles, angles_deg))}, '
        f'"wavenumbers": {_reals(tensor.wavenumbers)}, '
        f'"directions_deg": {_reals(_degrees(tensor.directions, directions_deg))}, '
        f'"noise": {noise}, '
        f'"provenance": {provenance}, '
        f'"data": [{pairs}]'
        "}\n"
    )


def loads_archive(text: str, source: str = "<string>") -> FarFieldTensor:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{source}: not a JSON document ({exc})") from exc
    if not isinstance(document, dict) or document.get("format") != ARCHIVE_FORMAT:
        raise ArchiveError(f"{source}: expected format {ARCHIVE_FORMAT!r}")
    try:
        angles_deg = np.asarray(document["angles_deg"], dtype=float)
        ks = np.asarray(document["wavenumbers"], dtype=float)
        directions_deg = np.asarray(document["directions_deg"], dtype=float)
        data = np.asarray(document["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveError(f"{source}: malformed archive field ({exc})") from exc
    angles, dirs = np.radians(angles_deg), np.radians(directions_deg)
    shape = (dirs.size, ks.size, angles.size)
    if data.shape != (int(np.prod(shape)), 2):
        raise ArchiveError(f"{source}: data holds {data.shape[0]} entries, axes need {int(np.prod(shape))}")
    values = (data[:, 0] + 1j * data[:, 1]).reshape(shape).transpose(2, 1, 0)
    try:
        return FarFieldTensor(
            values, angles, ks, dirs, document.get("noise"), dict(document.get("provenance") or {}),
            axes_deg=(angles_deg, directions_deg),
        )
    except Exception as exc:
        raise ArchiveError(f"{source}: inconsistent archive ({exc})") from exc


def write_archive(tensor: FarFieldTensor, path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(target.suffix + ".part")
        tmp.write_text(dumps_archive(tensor), encoding="utf-8")
        os.replace(tmp, target)
    except OSError as exc:
        raise ArchiveError(f"cannot write archive {target}: {exc}") from exc
    logger.info("wrote %s archive %s (%d x %d x %d)", ARCHIVE_FORMAT, target, *tensor.values.shape)
    return target


def read_archive(path: PathLike) -> FarFieldTensor:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ArchiveError(f"cannot read archive {source}: {exc}") from exc
    return loads_archive(text, str(source))


def field_frame(field: IndicatorField) -> pd.DataFrame:
    return pd.DataFrame({"x": field.grid.points[:, 0], "y": field.grid.points[:, 1], "value": field.values})


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, float_format="%.17g")
    except OSError as exc:
        raise ArchiveError(f"cannot write table {target}: {exc}") from exc
    return target


def write_field_csv(field: IndicatorField, path: PathLike) -> Path:
    return write_frame(field_frame(field), path)


def pgm_bytes(field: IndicatorField) -> bytes:
    """8-bit binary PGM of the max-normalized field, top row at ymax."""
    normalized = normalize(field)
    image = np.flipud(normalized.as_image())
    pixels = np.clip(np.rint(255.0 * image), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def write_field_pgm(field: IndicatorField, path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(pgm_bytes(field))
    except OSError as exc:
        raise ArchiveError(f"cannot write image {target}: {exc}") from exc
    return target


def write_json(document: Dict[str, Any], path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(document, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArchiveError(f"cannot write report {target}: {exc}") from exc
    return target


class ArchiveManager:
    """Output directory of one run: archives, indicator exports and reports."""

    def __init__(self, out_dir: Optional[PathLike] = None):
        self.out_dir = Path(out_dir or os.getenv("SCATTER_OUT_DIR", "out"))

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def save_tensor(self, tensor: FarFieldTensor, name: str = "farfield.json") -> Path:
        return write_archive(tensor, self.path(name))

    def load_tensor(self, name: str = "farfield.json") -> FarFieldTensor:
        return read_archive(self.path(name))

    def save_field(self, field: IndicatorField, stem: Optional[str] = None) -> Dict[str, str]:
        stem = stem or field.kind
        csv_path = write_field_csv(field, self.path(f"{stem}.csv"))
        pgm_path = write_field_pgm(field, self.path(f"{stem}.pgm"))
        return {"csv": str(csv_path), "pgm": str(pgm_path)}

    def save_report(self, report: Dict[str, Any], name: str) -> Path:
        return write_json(report, self.path(name))

    def save_frame(self, frame: pd.DataFrame, name: str) -> Path:
        return write_frame(frame, self.path(name))

    def discard(self, name: str) -> None:
        """Remove a partial output, if present."""
        for candidate in (self.path(name), self.path(name + ".part")):
            if candidate.exists():
                candidate.unlink()
                logger.warning("removed partial output %s", candidate)
