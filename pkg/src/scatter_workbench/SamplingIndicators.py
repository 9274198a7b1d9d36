"""Noise model and direct-sampling indicators over a sampling grid.

All four indicators are plain sums over observation angles l, wavenumbers m and
incident directions n of the far-field data back-propagated with e^{i k_m xhat_l . z}:

    potthast1(z; n) = sum_m | sum_l u(l, m, n) e^{i k_m xhat_l . z} |^2
    liu1(z; n)      = | sum_m e^{-i k_m d_n . z} sum_l u(l, m, n) e^{i k_m xhat_l . z} |^2
    potthastN(z)    = sum_n potthast1(z; n)
    liuN(z)         = | sum_n sum_m e^{-i k_m d_n . z} sum_l ... |^2
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from scatter_workbench.errors import DomainError, NoiseError
from scatter_workbench.ForwardSolver import FarFieldTensor
from scatter_workbench.Geometry import BoundaryCurve, SamplingGrid, mask_in_curve

logger = logging.getLogger(__name__)

INDICATOR_KINDS = ("potthast1", "liu1", "potthastN", "liuN")
SINGLE_DIRECTION = ("potthast1", "liu1")
CHUNK = 2048


@dataclass(frozen=True)
class NoiseSpec:
    delta: float = 0.1
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise NoiseError(f"noise level must lie in [0, 1), got {self.delta}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise NoiseError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def add_noise(tensor: FarFieldTensor, spec: NoiseSpec) -> FarFieldTensor:
    """Multiply every entry by 1 + delta (s1 + i s2) / |s1 + i s2| with s1, s2 ~ U(-1, 1)."""
    if tensor.noise is not None:
        raise NoiseError(f"far-field data already carry noise {tensor.noise}; refusing to add more")
    metadata = {"delta": float(spec.delta), "seed": int(spec.seed), "model": "relative-unit-phase"}
    if spec.delta == 0.0:
        return replace(tensor, values=tensor.values.copy(), noise=metadata)
    rng = np.random.default_rng(int(spec.seed))
    draws = rng.uniform(-1.0, 1.0, size=tensor.values.shape + (2,))
    zero = np.all(draws == 0.0, axis=-1)
    while np.any(zero):
        draws[zero] = rng.uniform(-1.0, 1.0, size=(int(zero.sum()), 2))
        zero = np.all(draws == 0.0, axis=-1)
    s = draws[..., 0] + 1j * draws[..., 1]
    noisy = (1.0 + spec.delta * s / np.abs(s)) * tensor.values
    logger.info("added %.0f%% relative noise (seed %d) to %d entries", 100 * spec.delta, spec.seed, s.size)
    return replace(tensor, values=noisy, noise=metadata)


@dataclass(frozen=True)
class IndicatorField:
    grid: SamplingGrid
    values: np.ndarray
    kind: str
    max_value: Optional[float] = None

    @property
    def degenerate(self) -> bool:
        return not np.any(self.values > 0)

    @property
    def normalized(self) -> bool:
        return self.max_value is not None

    def as_image(self) -> np.ndarray:
        """Values reshaped to (ny, nx) with row 0 at ymin."""
        n = self.grid.n_per_axis
        return self.values.reshape(n, n)


def normalize(field: IndicatorField) -> IndicatorField:
    """Max-normalized copy; the raw maximum is kept in ``max_value``."""
    peak = float(np.max(field.values)) if field.values.size else 0.0
    if peak <= 0.0:
        logger.warning("indicator %s is identically zero; nothing to normalize", field.kind)
        return replace(field, values=np.zeros_like(field.values), max_value=0.0)
    return replace(field, values=field.values / peak, max_value=peak)


def support_estimate(field: IndicatorField, level: float) -> np.ndarray:
    if not 0.0 < level < 1.0:
        raise DomainError(f"threshold level must lie in (0, 1), got {level}")
    peak = float(np.max(field.values))
    if peak <= 0.0:
        return np.zeros(field.values.shape, dtype=bool)
    return field.values >= level * peak


def argmax_point(field: IndicatorField) -> np.ndarray:
    return field.grid.points[int(np.argmax(field.values))]


def mask_centroid(grid: SamplingGrid, mask: np.ndarray) -> Optional[np.ndarray]:
    if not np.any(mask):
        return None
    return grid.points[mask].mean(axis=0)


def peak_to_background(field: IndicatorField, level: float = 0.5) -> float:
    """Peak value over the mean of the grid points below ``level`` times the peak."""
    peak = float(np.max(field.values))
    background = field.values[~support_estimate(field, level)] if peak > 0 else field.values
    mean = float(np.mean(background)) if background.size else 0.0
    if mean > 0:
        return peak / mean
    return float("inf") if peak > 0 else 0.0


def _back_propagated(tensor: FarFieldTensor, points: np.ndarray) -> np.ndarray:
    """sum_l u(l, m, n) e^{i k_m xhat_l . z}, shape (points, M, N)."""
    xhat = tensor.observation_vectors
    projection = points @ xhat.T
    out = np.empty((points.shape[0], tensor.wavenumbers.size, tensor.directions.size), dtype=complex)
    for m, k in enumerate(tensor.wavenumbers):
        out[:, m, :] = np.exp(1j * k * projection) @ tensor.values[:, m, :]
    return out


def _incident_compensation(tensor: FarFieldTensor, points: np.ndarray) -> np.ndarray:
    """e^{-i k_m d_n . z}, shape (points, M, N)."""
    projection = points @ tensor.direction_vectors.T
    return np.exp(-1j * tensor.wavenumbers[None, :, None] * projection[:, None, :])


def _chunk_values(kind: str, tensor: FarFieldTensor, points: np.ndarray, direction: Optional[int]) -> np.ndarray:
    inner = _back_propagated(tensor, points)
    if kind in SINGLE_DIRECTION:
        inner = inner[:, :, [direction]]
    if kind.startswith("potthast"):
        return np.sum(np.abs(inner) ** 2, axis=(1, 2))
    comp = _incident_compensation(tensor, points)
    if kind in SINGLE_DIRECTION:
        comp = comp[:, :, [direction]]
    return np.abs(np.sum(comp * inner, axis=(1, 2))) ** 2


def _evaluate(
    kind: str, tensor: FarFieldTensor, grid: SamplingGrid, direction: Optional[int] = None, threads: int = 1
) -> IndicatorField:
    if kind not in INDICATOR_KINDS:
        raise DomainError(f"unknown indicator {kind!r}; expected one of {INDICATOR_KINDS}")
    n_dirs = tensor.directions.size
    if kind in SINGLE_DIRECTION:
        if direction is None or not 0 <= direction < n_dirs:
            raise DomainError(f"{kind} needs a direction index in [0, {n_dirs}), got {direction}")
    elif n_dirs < 1:
        raise DomainError(f"{kind} needs at least one incident direction")
    chunks = [grid.points[i:i + CHUNK] for i in range(0, grid.points.shape[0], CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda pts: _chunk_values(kind, tensor, pts, direction), chunks))
    else:
        parts = [_chunk_values(kind, tensor, pts, direction) for pts in chunks]
    values = np.concatenate(parts) if parts else np.zeros(0)
    field = IndicatorField(grid, values.astype(float), kind)
    if field.degenerate:
        logger.warning("indicator %s vanishes on the whole grid", kind)
    else:
        logger.info("indicator %s: peak %.4g at %s", kind, values.max(), argmax_point(field))
    return field


def indicator_potthast_single(tensor: FarFieldTensor, n: int, grid: SamplingGrid, threads: int = 1) -> IndicatorField:
    return _evaluate("potthast1", tensor, grid, n, threads)


def indicator_liu_single(tensor: FarFieldTensor, n: int, grid: SamplingGrid, threads: int = 1) -> IndicatorField:
    return _evaluate("liu1", tensor, grid, n, threads)


def indicator_potthast_multi(tensor: FarFieldTensor, grid: SamplingGrid, threads: int = 1) -> IndicatorField:
    return _evaluate("potthastN", tensor, grid, None, threads)


def indicator_liu_multi(tensor: FarFieldTensor, grid: SamplingGrid, threads: int = 1) -> IndicatorField:
    return _evaluate("liuN", tensor, grid, None, threads)


def indicator(
    kind: str, tensor: FarFieldTensor, grid: SamplingGrid, direction: Optional[int] = None, threads: int = 1
) -> IndicatorField:
    return _evaluate(kind, tensor, grid, direction, threads)


def summarize(field: IndicatorField, level: float = 0.5) -> dict:
    """Argmax, peak value and threshold-mask centroid of a field."""
    normalized = normalize(field)
    mask = support_estimate(normalized, level) if not field.degenerate else np.zeros(field.values.shape, dtype=bool)
    centroid = mask_centroid(field.grid, mask)
    return {
        "indicator": field.kind,
        "argmax": argmax_point(field).tolist(),
        "peak": float(np.max(field.values)),
        "degenerate": field.degenerate,
        "level": level,
        "mask_points": int(mask.sum()),
        "mask_centroid": centroid.tolist() if centroid is not None else None,
        "peak_to_background": peak_to_background(field, level),
    }


def truth_metrics(
    field: IndicatorField,
    obstacle: Optional[BoundaryCurve] = None,
    medium: Optional[BoundaryCurve] = None,
    level: float = 0.5,
) -> dict:
    """Compare a field against the known scatterer: peak and mask location, coverage, contrast."""
    out = {}
    if field.degenerate:
        return out
    normalized = normalize(field)
    mask = support_estimate(normalized, level)
    if obstacle is not None:
        truth = mask_in_curve(obstacle, field.grid)
        centroid = np.asarray(obstacle.centroid)
        out["obstacle_centroid"] = centroid.tolist()
        out["argmax_error"] = float(np.hypot(*(argmax_point(field) - centroid)))
        mask_center = mask_centroid(field.grid, mask)
        out["mask_centroid_error"] = float(np.hypot(*(mask_center - centroid))) if mask_center is not None else None
        out["coverage"] = float(np.sum(mask & truth) / max(int(truth.sum()), 1))
    if medium is not None:
        inside = mask_in_curve(medium, field.grid)
        if obstacle is not None:
            inside &= ~mask_in_curve(obstacle, field.grid)
        if np.any(inside) and np.any(~inside):
            mean_out = float(np.mean(normalized.values[~inside]))
            mean_in = float(np.mean(normalized.values[inside]))
            out["medium_contrast"] = mean_in / mean_out if mean_out > 0 else float("inf")
    return out
