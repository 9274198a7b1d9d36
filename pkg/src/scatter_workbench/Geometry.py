"""Boundary curves, Nystrom boundary meshes, volume meshes and sampling grids."""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from scatter_workbench.errors import GeometryError, NearBoundaryError

logger = logging.getLogger(__name__)

CURVE_KINDS = ("circle", "kite", "rounded_square", "trig_poly")
DEFAULT_PARAMS = {
    "circle": (1.0,),
    "kite": (0.65, 1.5),
    "rounded_square": (2.25,),
    "trig_poly": (1.0,),
}
_SAMPLES = 4096
_CHUNK = 512


@dataclass(frozen=True)
class BoundaryCurve:
    """Smooth closed curve x(t), t in [0, 2 pi), counterclockwise.

    ``offset`` translates and ``rotation`` rotates (radians, about the origin,
    applied before the translation) the canonical shape of ``kind``.
    """

    kind: str
    params: Tuple[float, ...]
    offset: Tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0

    def _canonical(self, t: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
        p = self.params
        if self.kind == "circle":
            a = p[0]
            c, s = np.cos(t), np.sin(t)
            table = ((a * c, a * s), (-a * s, a * c), (-a * c, -a * s))
            return table[order]
        if self.kind == "kite":
            bend, height = p[0], p[1]
            if order == 0:
                return np.cos(t) + bend * np.cos(2 * t) - bend, height * np.sin(t)
            if order == 1:
                return -np.sin(t) - 2 * bend * np.sin(2 * t), height * np.cos(t)
            return -np.cos(t) - 4 * bend * np.cos(2 * t), -height * np.sin(t)
        if self.kind == "rounded_square":
            a = p[0]
            c, s = np.cos(t), np.sin(t)
            if order == 0:
                return a * (c ** 3 + c), a * (s ** 3 + s)
            if order == 1:
                return a * (-3 * c ** 2 * s - s), a * (3 * s ** 2 * c + c)
            return (
                a * (6 * c * s ** 2 - 3 * c ** 3 - c),
                a * (6 * s * c ** 2 - 3 * s ** 3 - s),
            )
        # trig_poly: radial function r(t) = a0 + sum_m a_m cos(m t) + b_m sin(m t)
        r, dr, ddr = self._radial(t)
        c, s = np.cos(t), np.sin(t)
        if order == 0:
            return r * c, r * s
        if order == 1:
            return dr * c - r * s, dr * s + r * c
        return ddr * c - 2 * dr * s - r * c, ddr * s + 2 * dr * c - r * s

    def _radial(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        coeffs = self.params
        r = np.full_like(t, coeffs[0], dtype=float)
        dr = np.zeros_like(r)
        ddr = np.zeros_like(r)
        for idx in range(1, len(coeffs), 2):
            m = (idx + 1) // 2
            a = coeffs[idx]
            b = coeffs[idx + 1] if idx + 1 < len(coeffs) else 0.0
            r = r + a * np.cos(m * t) + b * np.sin(m * t)
            dr = dr + m * (-a * np.sin(m * t) + b * np.cos(m * t))
            ddr = ddr - m * m * (a * np.cos(m * t) + b * np.sin(m * t))
        return r, dr, ddr

    def _evaluate(self, t, order: int) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x, y = self._canonical(t, order)
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        out = np.stack([c * x - s * y, s * x + c * y], axis=-1)
        if order == 0:
            out = out + np.asarray(self.offset, dtype=float)
        return out

    def point(self, t) -> np.ndarray:
        return self._evaluate(t, 0)

    def derivative(self, t) -> np.ndarray:
        return self._evaluate(t, 1)

    def second_derivative(self, t) -> np.ndarray:
        return self._evaluate(t, 2)

    def tangent(self, t) -> np.ndarray:
        d = self.derivative(t)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, t) -> np.ndarray:
        """Outward unit normal (x2', -x1') / |x'|."""
        d = self.derivative(t)
        n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def translated(self, shift: Sequence[float]) -> "BoundaryCurve":
        return BoundaryCurve(
            self.kind,
            self.params,
            (self.offset[0] + shift[0], self.offset[1] + shift[1]),
            self.rotation,
        )

    def rotated(self, angle: float) -> "BoundaryCurve":
        c, s = np.cos(angle), np.sin(angle)
        ox, oy = self.offset
        return BoundaryCurve(self.kind, self.params, (c * ox - s * oy, s * ox + c * oy), self.rotation + angle)

    @cached_property
    def samples(self) -> np.ndarray:
        return self.point(np.linspace(0.0, 2 * np.pi, _SAMPLES, endpoint=False))

    @cached_property
    def area(self) -> float:
        t = np.linspace(0.0, 2 * np.pi, 1024, endpoint=False)
        x, d = self.point(t), self.derivative(t)
        return float(np.mean(x[:, 0] * d[:, 1] - x[:, 1] * d[:, 0]) * np.pi)

    @cached_property
    def length(self) -> float:
        t = np.linspace(0.0, 2 * np.pi, 1024, endpoint=False)
        return float(np.mean(np.linalg.norm(self.derivative(t), axis=1)) * 2 * np.pi)

    @cached_property
    def centroid(self) -> Tuple[float, float]:
        """Area centroid from Green's theorem."""
        t = np.linspace(0.0, 2 * np.pi, 1024, endpoint=False)
        x, d = self.point(t), self.derivative(t)
        w = 2 * np.pi / t.size
        cx = np.sum(0.5 * x[:, 0] ** 2 * d[:, 1]) * w / self.area
        cy = -np.sum(0.5 * x[:, 1] ** 2 * d[:, 0]) * w / self.area
        return float(cx), float(cy)

    @cached_property
    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self.samples, axis=1)))

    @cached_property
    def bbox(self) -> Tuple[float, float, float, float]:
        s = self.samples
        return float(s[:, 0].min()), float(s[:, 0].max()), float(s[:, 1].min()), float(s[:, 1].max())


def _segments_intersect(nodes: np.ndarray) -> bool:
    a = nodes
    b = np.roll(nodes, -1, axis=0)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    d1, d2 = orient(A, B, C), orient(A, B, D)
    d3, d4 = orient(C, D, A), orient(C, D, B)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    n = nodes.shape[0]
    i, j = np.indices((n, n))
    gap = np.abs(i - j)
    crossing &= (gap > 1) & (gap < n - 1)
    return bool(np.any(crossing))


def make_curve(
    kind: str,
    params: Optional[Sequence[float]] = None,
    offset: Sequence[float] = (0.0, 0.0),
    rotation: float = 0.0,
) -> BoundaryCurve:
    if kind not in CURVE_KINDS:
        raise GeometryError(f"unknown curve kind {kind!r}, expected one of {CURVE_KINDS}")
    values = tuple(float(v) for v in (DEFAULT_PARAMS[kind] if params is None else params))
    if kind == "circle" and (len(values) != 1 or values[0] <= 0):
        raise GeometryError("circle needs a single positive radius")
    if kind == "kite" and (len(values) != 2 or values[1] == 0):
        raise GeometryError("kite needs (bend, height) with nonzero height")
    if kind == "rounded_square" and (len(values) != 1 or values[0] <= 0):
        raise GeometryError("rounded_square needs a single positive scale")
    curve = BoundaryCurve(kind, values, (float(offset[0]), float(offset[1])), float(rotation))
    t = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
    if kind == "trig_poly" and np.any(curve._radial(t)[0] <= 0):
        raise GeometryError("trig_poly radial function must stay positive")
    if np.min(np.linalg.norm(curve.derivative(t), axis=1)) <= 1e-12:
        raise GeometryError(f"{kind} parametrization is not regular")
    if curve.area <= 0:
        raise GeometryError(f"{kind} is not counterclockwise")
    if _segments_intersect(curve.point(t)):
        raise GeometryError(f"{kind} with params {values} self-intersects")
    return curve


@dataclass(frozen=True)
class BoundaryMesh:
    curve: BoundaryCurve
    t: np.ndarray
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    jacobians: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def weight(self) -> float:
        return 2 * np.pi / self.n

    @property
    def weights(self) -> np.ndarray:
        """Arc-length quadrature weights jacobian * 2 pi / N."""
        return self.jacobians * self.weight

    @property
    def spacing(self) -> float:
        return float(np.max(self.jacobians) * self.weight)

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))

    def refine(self, factor: int) -> "BoundaryMesh":
        return discretize_boundary(self.curve, self.n * factor)


def discretize_boundary(curve: BoundaryCurve, n: int) -> BoundaryMesh:
    if n < 8 or n % 2:
        raise GeometryError(f"boundary node count must be even and >= 8, got {n}")
    t = 2 * np.pi * np.arange(n) / n
    d1 = curve.derivative(t)
    jac = np.linalg.norm(d1, axis=1)
    tangents = d1 / jac[:, None]
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    return BoundaryMesh(
        curve=curve,
        t=t,
        nodes=curve.point(t),
        d1=d1,
        d2=curve.second_derivative(t),
        jacobians=jac,
        normals=normals,
        tangents=tangents,
    )


def trig_interpolation_matrix(n: int, factor: int) -> np.ndarray:
    """Real (factor*n, n) matrix of periodic trigonometric interpolation."""
    if factor == 1:
        return np.eye(n)
    spectrum = np.fft.fft(np.eye(n), axis=0)
    m = factor * n
    half = n // 2
    padded = np.zeros((m, n), dtype=complex)
    padded[:half] = spectrum[:half]
    padded[m - half + 1:] = spectrum[half + 1:]
    padded[half] = 0.5 * spectrum[half]
    padded[m - half] = 0.5 * spectrum[half]
    return (np.fft.ifft(padded, axis=0) * factor).real


def distance_to_curve(curve: BoundaryCurve, points: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the curve (sampled, then Newton-polished)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    t_samples = np.linspace(0.0, 2 * np.pi, _SAMPLES, endpoint=False)
    samples = curve.samples
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], _CHUNK):
        chunk = pts[start:start + _CHUNK]
        d2 = np.sum((chunk[:, None, :] - samples[None, :, :]) ** 2, axis=2)
        t = t_samples[np.argmin(d2, axis=1)]
        for _ in range(4):
            diff = curve.point(t) - chunk
            d1 = curve.derivative(t)
            g = np.sum(diff * d1, axis=1)
            dg = np.sum(d1 * d1, axis=1) + np.sum(diff * curve.second_derivative(t), axis=1)
            step = np.where(np.abs(dg) > 1e-14, g / np.where(dg == 0, 1.0, dg), 0.0)
            t = t - np.clip(step, -0.01, 0.01)
        out[start:start + _CHUNK] = np.minimum(
            np.linalg.norm(curve.point(t) - chunk, axis=1), np.sqrt(np.min(d2, axis=1))
        )
    return out


def winding_numbers(curve: BoundaryCurve, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    samples = curve.samples
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], _CHUNK):
        chunk = pts[start:start + _CHUNK]
        rel = samples[None, :, :] - chunk[:, None, :]
        angles = np.arctan2(rel[..., 1], rel[..., 0])
        steps = np.diff(np.concatenate([angles, angles[:, :1]], axis=1), axis=1)
        steps = (steps + np.pi) % (2 * np.pi) - np.pi
        out[start:start + _CHUNK] = np.sum(steps, axis=1) / (2 * np.pi)
    return np.rint(out)


def points_in_curve(curve: BoundaryCurve, points: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """Membership by winding number; with ``tol`` points that close to the curve raise."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if tol is not None:
        dist = distance_to_curve(curve, pts)
        bad = np.flatnonzero(dist <= tol)
        if bad.size:
            raise NearBoundaryError(f"{bad.size} point(s) lie on the {curve.kind} curve", bad)
    return winding_numbers(curve, pts) == 1


def point_in_curve(curve: BoundaryCurve, p: Sequence[float]) -> bool:
    return bool(points_in_curve(curve, np.asarray(p, dtype=float)[None, :], tol=1e-12)[0])


@dataclass(frozen=True)
class VolumeMesh:
    """Uniform square cells of the lattice origin + (i h, j h) kept inside Omega minus D."""

    cell_centers: np.ndarray
    h: float
    origin: Tuple[float, float] = (0.0, 0.0)
    shape: Tuple[int, int] = (0, 0)
    indices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    @property
    def n(self) -> int:
        return self.cell_centers.shape[0]

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def area(self) -> float:
        return self.n * self.cell_area

    @property
    def is_empty(self) -> bool:
        return self.n == 0


def empty_volume_mesh(h: float = 1.0) -> VolumeMesh:
    return VolumeMesh(cell_centers=np.zeros((0, 2)), h=h)


def build_volume_mesh(omega: Optional[BoundaryCurve], d: Optional[BoundaryCurve], h: float) -> VolumeMesh:
    if h <= 0:
        raise GeometryError("cell size must be positive")
    if omega is None:
        return empty_volume_mesh(h)
    if d is not None:
        d_nodes = d.samples[:: max(1, _SAMPLES // 512)]
        inside = winding_numbers(omega, d_nodes) == 1
        gap = np.min(distance_to_curve(omega, d_nodes))
        if not np.all(inside) or gap <= 1e-8 * max(1.0, omega.circumradius):
            raise GeometryError("obstacle is not compactly contained in the medium support")
    xmin, xmax, ymin, ymax = omega.bbox
    nx = int(np.ceil((xmax - xmin) / h))
    ny = int(np.ceil((ymax - ymin) / h))
    origin = (xmin + 0.5 * h, ymin + 0.5 * h)
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ix, iy = ix.ravel(), iy.ravel()
    centers = np.stack([origin[0] + ix * h, origin[1] + iy * h], axis=1)
    keep = winding_numbers(omega, centers) == 1
    if d is not None:
        keep &= winding_numbers(d, centers) == 0
    mesh = VolumeMesh(
        cell_centers=centers[keep],
        h=float(h),
        origin=origin,
        shape=(nx, ny),
        indices=np.stack([ix[keep], iy[keep]], axis=1),
    )
    logger.debug("volume mesh: %d cells of size %.4g on a %dx%d lattice", mesh.n, h, nx, ny)
    return mesh


@dataclass(frozen=True)
class SamplingGrid:
    """Rectangular grid, row-major with y outer and x inner: index = iy * n + ix."""

    bbox: Tuple[float, float, float, float]
    n_per_axis: int
    points: np.ndarray

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.bbox[0], self.bbox[1], self.n_per_axis)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.bbox[2], self.bbox[3], self.n_per_axis)

    @property
    def spacing(self) -> Tuple[float, float]:
        n = self.n_per_axis - 1
        return (self.bbox[1] - self.bbox[0]) / n, (self.bbox[3] - self.bbox[2]) / n

    def translated(self, shift: Sequence[float]) -> "SamplingGrid":
        xmin, xmax, ymin, ymax = self.bbox
        return make_grid((xmin + shift[0], xmax + shift[0], ymin + shift[1], ymax + shift[1]), self.n_per_axis)


def make_grid(bbox: Sequence[float], n: int) -> SamplingGrid:
    xmin, xmax, ymin, ymax = (float(v) for v in bbox)
    if not (xmin < xmax and ymin < ymax) or n < 2:
        raise GeometryError(f"degenerate sampling grid {bbox} with {n} points per axis")
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return SamplingGrid(bbox=(xmin, xmax, ymin, ymax), n_per_axis=int(n), points=points)


def mask_in_curve(curve: BoundaryCurve, grid: SamplingGrid) -> np.ndarray:
    return points_in_curve(curve, grid.points)
