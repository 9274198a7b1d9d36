"""Run configuration: JSON schema, benchmark defaults and environment overrides.

Every validation failure raises ConfigError with the JSON pointer of the offending
field. Angles and directions are degrees in JSON and radians everywhere else.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import load_dotenv

from scatter_workbench.ArchiveManager import config_hash
from scatter_workbench.errors import ConfigError, WorkbenchError
from scatter_workbench.ForwardSolver import BC_KINDS, Discretization, MediumSpec, ScattererConfig
from scatter_workbench.Geometry import CURVE_KINDS, BoundaryCurve, SamplingGrid, make_curve, make_grid
from scatter_workbench.SamplingIndicators import INDICATOR_KINDS, NoiseSpec

load_dotenv()

logger = logging.getLogger(__name__)

# (k_min, k_max, M)
BENCHMARK_BANDS = {
    "obstacle": (0.1, 2.0, 10),
    "medium": (0.1, 10.0, 50),
}


def env_threads() -> int:
    return max(1, int(os.getenv("SCATTER_THREADS", "1")))


def env_log_level() -> str:
    return os.getenv("SCATTER_LOG_LEVEL", "INFO").upper()


@dataclass(frozen=True)
class CurveSpec:
    kind: str
    params: Optional[Tuple[float, ...]] = None
    offset: Tuple[float, float] = (0.0, 0.0)
    rotation_deg: float = 0.0

    def build(self) -> BoundaryCurve:
        return make_curve(self.kind, self.params, self.offset, np.radians(self.rotation_deg))


@dataclass(frozen=True)
class ScattererSpec:
    obstacle: Optional[CurveSpec] = CurveSpec("kite")
    bc: str = "soft"
    medium: Optional[CurveSpec] = CurveSpec("rounded_square")
    q: Tuple[float, float] = (0.5, 0.0)
    values_file: Optional[str] = None
    R: float = 6.0

    def build(self) -> ScattererConfig:
        return ScattererConfig(
            obstacle=self.obstacle.build() if self.obstacle else None,
            bc=self.bc,
            medium=self.medium.build() if self.medium else None,
            contrast=MediumSpec(complex(*self.q), self.values_file),
            R=self.R,
        )


@dataclass(frozen=True)
class DiscretizationSpec:
    n_boundary: int = 256
    h_volume: float = 0.05

    def build(self) -> Discretization:
        return Discretization(n_boundary=self.n_boundary, h_volume=self.h_volume)


@dataclass(frozen=True)
class DatasetSpec:
    L: int = 64
    k_min: float = 0.1
    k_max: float = 2.0
    M: int = 10
    directions_deg: Tuple[float, ...] = (180.0,)

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.L) / self.L

    @property
    def wavenumbers(self) -> np.ndarray:
        if self.M == 1:
            return np.array([self.k_min])
        return np.linspace(self.k_min, self.k_max, self.M)

    @property
    def directions(self) -> np.ndarray:
        return np.radians(np.asarray(self.directions_deg, dtype=float))


@dataclass(frozen=True)
class GridSpec:
    bbox: Tuple[float, float, float, float] = (-6.0, 6.0, -6.0, 6.0)
    n: int = 121

    def build(self) -> SamplingGrid:
        return make_grid(self.bbox, self.n)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    archive: str = "farfield.json"


@dataclass(frozen=True)
class RunConfig:
    scatterer: ScattererSpec = ScattererSpec()
    discretization: DiscretizationSpec = DiscretizationSpec()
    dataset: DatasetSpec = DatasetSpec()
    noise: Optional[NoiseSpec] = NoiseSpec()
    grid: GridSpec = GridSpec()
    indicators: Tuple[str, ...] = INDICATOR_KINDS
    direction_index: int = 0
    output: OutputSpec = OutputSpec()
    threads: int = field(default_factory=env_threads)

    def to_dict(self) -> Dict[str, Any]:
        document = asdict(self)
        document.pop("threads")
        return document

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


class _Reader:
    """Typed access to a JSON object that reports failures with pointers."""

    def __init__(self, document: Any, pointer: str = ""):
        if not isinstance(document, dict):
            raise ConfigError("expected an object", pointer)
        self.document = document
        self.pointer = pointer

    def at(self, key: str) -> str:
        return f"{self.pointer}/{key}"

    def check_keys(self, allowed: Sequence[str]) -> None:
        for key in self.document:
            if key not in allowed:
                raise ConfigError(f"unknown field (allowed: {', '.join(allowed)})", self.at(key))

    def has(self, key: str) -> bool:
        return self.document.get(key) is not None

    def child(self, key: str) -> "_Reader":
        return _Reader(self.document[key], self.at(key))

    def number(self, key: str, default: float, positive: bool = False) -> float:
        value = self.document.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            raise ConfigError(f"expected a finite number, got {value!r}", self.at(key))
        if positive and value <= 0:
            raise ConfigError(f"must be positive, got {value}", self.at(key))
        return float(value)

    def integer(self, key: str, default: int, minimum: int = 0) -> int:
        value = self.document.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", self.at(key))
        if value < minimum:
            raise ConfigError(f"must be at least {minimum}, got {value}", self.at(key))
        return value

    def choice(self, key: str, default: str, options: Sequence[str]) -> str:
        value = self.document.get(key, default)
        if value not in options:
            raise ConfigError(f"expected one of {list(options)}, got {value!r}", self.at(key))
        return value

    def numbers(self, key: str, default: Sequence[float], length: Optional[int] = None) -> Tuple[float, ...]:
        value = self.document.get(key, default)
        if not isinstance(value, (list, tuple)) or (length is not None and len(value) != length):
            raise ConfigError(f"expected a list of {length or 'some'} numbers, got {value!r}", self.at(key))
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, (int, float)) or not np.isfinite(item):
                raise ConfigError(f"expected a finite number, got {item!r}", f"{self.at(key)}/{i}")
        return tuple(float(v) for v in value)

    def string(self, key: str, default: Optional[str]) -> Optional[str]:
        value = self.document.get(key, default)
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", self.at(key))
        return value


def _curve(reader: _Reader, default: Optional[CurveSpec]) -> CurveSpec:
    reader.check_keys(("kind", "params", "offset", "rotation_deg"))
    kind = reader.choice("kind", default.kind if default else "circle", CURVE_KINDS)
    params = reader.numbers("params", ()) if reader.has("params") else None
    spec = CurveSpec(
        kind=kind,
        params=params,
        offset=reader.numbers("offset", (0.0, 0.0), 2),
        rotation_deg=reader.number("rotation_deg", 0.0),
    )
    try:
        spec.build()
    except WorkbenchError as exc:
        raise ConfigError(str(exc), reader.pointer) from exc
    return spec


def _scatterer(reader: _Reader) -> ScattererSpec:
    reader.check_keys(("obstacle", "bc", "medium", "R"))
    base = ScattererSpec()
    obstacle = _curve(reader.child("obstacle"), base.obstacle) if reader.has("obstacle") else None
    medium = None
    q, values_file = base.q, None
    if reader.has("medium"):
        medium_reader = reader.child("medium")
        medium_reader.check_keys(("kind", "params", "offset", "rotation_deg", "q", "values_file"))
        curve_part = {k: v for k, v in medium_reader.document.items() if k not in ("q", "values_file")}
        medium = _curve(_Reader(curve_part, medium_reader.pointer), base.medium)
        raw_q = medium_reader.document.get("q", list(base.q))
        if isinstance(raw_q, (int, float)) and not isinstance(raw_q, bool):
            q = (float(raw_q), 0.0)
        else:
            q = medium_reader.numbers("q", base.q, 2)
        if q[1] < 0:
            raise ConfigError("contrast must satisfy Im V >= 0", medium_reader.at("q"))
        values_file = medium_reader.string("values_file", None)
        if values_file is not None and not Path(values_file).is_file():
            raise ConfigError(f"contrast file {values_file} does not exist", medium_reader.at("values_file"))
    bc = reader.choice("bc", "soft" if obstacle else "none", BC_KINDS)
    if obstacle is not None and bc == "none":
        raise ConfigError("an obstacle needs bc soft or hard", reader.at("bc"))
    if obstacle is None and bc != "none":
        logger.warning("bc=%s given without an obstacle; ignoring it", bc)
        bc = "none"
    spec = ScattererSpec(obstacle, bc, medium, q, values_file, reader.number("R", base.R, positive=True))
    try:
        spec.build()
    except WorkbenchError as exc:
        raise ConfigError(str(exc), reader.pointer) from exc
    return spec


def _dataset(reader: _Reader) -> DatasetSpec:
    reader.check_keys(("L", "k_min", "k_max", "M", "directions_deg", "band"))
    base = DatasetSpec()
    k_min, k_max, m = base.k_min, base.k_max, base.M
    if reader.has("band"):
        k_min, k_max, m = BENCHMARK_BANDS[reader.choice("band", "obstacle", tuple(BENCHMARK_BANDS))]
    spec = DatasetSpec(
        L=reader.integer("L", base.L, minimum=1),
        k_min=reader.number("k_min", k_min, positive=True),
        k_max=reader.number("k_max", k_max, positive=True),
        M=reader.integer("M", m, minimum=1),
        directions_deg=reader.numbers("directions_deg", base.directions_deg),
    )
    if spec.M > 1 and not spec.k_min < spec.k_max:
        raise ConfigError(f"k_max must exceed k_min={spec.k_min} when M > 1", reader.at("k_max"))
    if not spec.directions_deg:
        raise ConfigError("at least one incident direction is required", reader.at("directions_deg"))
    return spec


def _noise(reader: _Reader) -> NoiseSpec:
    reader.check_keys(("delta", "seed"))
    seed = reader.integer("seed", 42)
    delta = reader.number("delta", 0.1)
    try:
        return NoiseSpec(delta, seed)
    except WorkbenchError as exc:
        raise ConfigError(str(exc), reader.pointer) from exc


def parse_config(document: Any) -> RunConfig:
    root = _Reader(document)
    root.check_keys(
        ("scatterer", "discretization", "dataset", "noise", "grid", "indicators", "direction_index", "output", "threads")
    )
    base = RunConfig()
    scatterer = _scatterer(root.child("scatterer")) if root.has("scatterer") else base.scatterer
    discretization = base.discretization
    if root.has("discretization"):
        reader = root.child("discretization")
        reader.check_keys(("n_boundary", "h_volume"))
        n_boundary = reader.integer("n_boundary", discretization.n_boundary, minimum=8)
        if n_boundary % 2:
            raise ConfigError("boundary node count must be even", reader.at("n_boundary"))
        discretization = DiscretizationSpec(n_boundary, reader.number("h_volume", discretization.h_volume, positive=True))
    dataset = _dataset(root.child("dataset")) if root.has("dataset") else base.dataset
    if "noise" in document and document["noise"] is None:
        noise = None
    else:
        noise = _noise(root.child("noise")) if root.has("noise") else base.noise
    grid = base.grid
    if root.has("grid"):
        reader = root.child("grid")
        reader.check_keys(("bbox", "n"))
        grid = GridSpec(reader.numbers("bbox", grid.bbox, 4), reader.integer("n", grid.n, minimum=2))
        try:
            grid.build()
        except WorkbenchError as exc:
            raise ConfigError(str(exc), reader.pointer) from exc
    indicators = base.indicators
    if root.has("indicators"):
        raw = document["indicators"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("expected a nonempty list of indicator names", "/indicators")
        for i, name in enumerate(raw):
            if name not in INDICATOR_KINDS:
                raise ConfigError(f"unknown indicator {name!r}", f"/indicators/{i}")
        indicators = tuple(raw)
    direction_index = root.integer("direction_index", 0)
    if direction_index >= len(dataset.directions_deg):
        raise ConfigError(f"only {len(dataset.directions_deg)} direction(s) configured", "/direction_index")
    output = base.output
    if root.has("output"):
        reader = root.child("output")
        reader.check_keys(("dir", "archive"))
        output = OutputSpec(reader.string("dir", output.dir), reader.string("archive", output.archive))
    threads = root.integer("threads", env_threads(), minimum=1)
    return RunConfig(scatterer, discretization, dataset, noise, grid, indicators, direction_index, output, threads)


def load_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """RunConfig from a JSON file; ``None`` gives the benchmark defaults."""
    if path is None:
        return RunConfig()
    source = Path(path)
    try:
        document = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source} is not valid JSON: {exc}") from exc
    config = parse_config(document)
    logger.info("loaded configuration %s (hash %s)", source, config.hash[:12])
    return config
