"""Volume potentials over the medium cells and their boundary traces.

Cell values are integrated with the midpoint rule. The cell containing the target is
replaced by the equal-area disc: exact Laplace integral plus the smooth part of the
low-frequency expansion at radius zero. Targets that are not cell centers but sit
closer than one cell size to a center get a sub-cell midpoint average for that cell.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special

from scatter_workbench.errors import ConfigError, DomainError, GeometryError
from scatter_workbench.Geometry import BoundaryMesh, VolumeMesh
from scatter_workbench.SpecialFunctions import C2

logger = logging.getLogger(__name__)

SUBCELLS = 8
_DEGENERATE = 1e-14


@dataclass(frozen=True)
class MediumField:
    """Contrast V sampled at the cell centers of a VolumeMesh."""

    values: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if np.any(~np.isfinite(vals)):
            raise DomainError("contrast values must be finite")
        if np.any(vals.imag < -1e-15):
            raise DomainError("contrast must satisfy Im V >= 0")
        object.__setattr__(self, "values", vals)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def scaled(self, alpha: complex) -> "MediumField":
        return MediumField(alpha * self.values, self.uniform)


def uniform_medium(mesh: VolumeMesh, q: complex) -> MediumField:
    return MediumField(np.full(mesh.n, complex(q)), uniform=True)


def medium_from_csv(mesh: VolumeMesh, path: Union[str, Path]) -> MediumField:
    """Per-cell contrast from rows ``cx, cy, re, im``; cells without a row get 0."""
    try:
        frame = pd.read_csv(path, header=None, names=["cx", "cy", "re", "im"], comment="#")
    except (OSError, pd.errors.ParserError) as exc:
        raise ConfigError(f"cannot read contrast file {path}: {exc}", "/scatterer/medium/values_file") from exc
    values = np.zeros(mesh.n, dtype=complex)
    if mesh.is_empty:
        return MediumField(values)
    lookup = {tuple(idx): c for c, idx in enumerate(mesh.indices.tolist())}
    ix = np.rint((frame["cx"].to_numpy() - mesh.origin[0]) / mesh.h).astype(int)
    iy = np.rint((frame["cy"].to_numpy() - mesh.origin[1]) / mesh.h).astype(int)
    for row, (i, j) in enumerate(zip(ix, iy)):
        cell = lookup.get((i, j))
        if cell is None or np.hypot(*(mesh.cell_centers[cell] - frame.iloc[row, :2].to_numpy())) > 0.25 * mesh.h:
            raise ConfigError(
                f"row {row} of {path} does not match a cell center within h/4", "/scatterer/medium/values_file"
            )
        values[cell] = frame["re"].iat[row] + 1j * frame["im"].iat[row]
    logger.info("loaded contrast for %d of %d cells from %s", len(frame), mesh.n, path)
    return MediumField(values)


@dataclass(frozen=True)
class VolumeOperatorMatrix:
    entries: np.ndarray
    wavenumber: Optional[float] = None

    def apply(self, cell_values: np.ndarray) -> np.ndarray:
        return self.entries @ cell_values


def _kernel(k: Optional[float], r: np.ndarray) -> np.ndarray:
    if k is None:
        return -np.log(r) / (2 * np.pi)
    return 0.25j * special.hankel1(0, k * r)


def _kernel_dr(k: Optional[float], r: np.ndarray) -> np.ndarray:
    if k is None:
        return -1.0 / (2 * np.pi * r)
    return -0.25j * k * special.hankel1(1, k * r)


def self_cell_value(k: Optional[float], h: float) -> complex:
    """Integral of the kernel over the disc of area h^2 centered at the target."""
    rho = h / np.sqrt(np.pi)
    laplace = rho ** 2 / 4.0 * (1.0 - 2.0 * np.log(rho))
    if k is None:
        return laplace
    return laplace + (-np.log(k) / (2 * np.pi) + C2) * h * h


def _check_wavenumber(k: Optional[float]) -> None:
    if k is not None and not k > 0:
        raise DomainError(f"wavenumber must be positive, got {k!r}")


def _subcell_offsets(h: float) -> np.ndarray:
    s = (np.arange(SUBCELLS) + 0.5) / SUBCELLS - 0.5
    gx, gy = np.meshgrid(s, s, indexing="ij")
    return h * np.stack([gx.ravel(), gy.ravel()], axis=1)


def _point_entries(
    k: Optional[float],
    mesh: VolumeMesh,
    points: np.ndarray,
    normals: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Kernel (or its normal derivative in x) integrated over each cell, without V."""
    diff = points[:, None, :] - mesh.cell_centers[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    if np.any(r < _DEGENERATE * max(1.0, mesh.h)):
        bad = np.flatnonzero(np.any(r < _DEGENERATE * max(1.0, mesh.h), axis=1))
        raise GeometryError(f"target(s) {bad.tolist()} coincide with a cell center; use targets='self'")
    if normals is None:
        out = _kernel(k, r) * mesh.cell_area
    else:
        dot = np.sum(diff * normals[:, None, :], axis=2)
        out = _kernel_dr(k, r) * dot / r * mesh.cell_area
    near_p, near_c = np.nonzero(r < mesh.h)
    if near_p.size:
        offsets = _subcell_offsets(mesh.h)
        sub = points[near_p, None, :] - (mesh.cell_centers[near_c, None, :] + offsets[None, :, :])
        rs = np.hypot(sub[..., 0], sub[..., 1])
        if normals is None:
            vals = _kernel(k, rs)
        else:
            vals = _kernel_dr(k, rs) * np.sum(sub * normals[near_p, None, :], axis=2) / rs
        out[near_p, near_c] = vals.mean(axis=1) * mesh.cell_area
    return out


def assemble_volume(
    k: Optional[float],
    mesh: VolumeMesh,
    medium: MediumField,
    targets: Union[str, np.ndarray] = "self",
    self_correction: bool = True,
) -> VolumeOperatorMatrix:
    """Dense matrix of u -> int Phi(x, y) V(y) u(y) dy at the targets.

    ``k=None`` selects the Laplace kernel.
    """
    _check_wavenumber(k)
    n_targets = mesh.n if isinstance(targets, str) else np.atleast_2d(targets).shape[0]
    if mesh.is_empty or medium.is_zero:
        return VolumeOperatorMatrix(np.zeros((n_targets, mesh.n), dtype=complex), k)
    if isinstance(targets, str):
        if targets != "self":
            raise GeometryError(f"unknown target selector {targets!r}")
        diff = mesh.cell_centers[:, None, :] - mesh.cell_centers[None, :, :]
        r = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(r, 1.0)
        entries = _kernel(k, r).astype(complex) * mesh.cell_area
        np.fill_diagonal(entries, self_cell_value(k, mesh.h) if self_correction else 0.0)
    else:
        entries = _point_entries(k, mesh, np.atleast_2d(np.asarray(targets, dtype=float))).astype(complex)
    logger.debug("assembled %dx%d volume operator at k=%s", entries.shape[0], entries.shape[1], k)
    return VolumeOperatorMatrix(entries * medium.values[None, :], k)


class VolumeConvolution:
    """Self map of the volume potential applied by FFT on the cell lattice.

    Entries agree with ``assemble_volume(k, mesh, medium, "self")``.
    """

    def __init__(self, k: Optional[float], mesh: VolumeMesh, medium: MediumField):
        _check_wavenumber(k)
        self.k = k
        self.mesh = mesh
        self.medium = medium
        nx, ny = mesh.shape
        self._padded = (2 * nx, 2 * ny)
        i = np.fft.fftfreq(2 * nx, 1.0 / (2 * nx))
        j = np.fft.fftfreq(2 * ny, 1.0 / (2 * ny))
        ii, jj = np.meshgrid(i, j, indexing="ij")
        r = mesh.h * np.hypot(ii, jj)
        r[0, 0] = 1.0
        kernel = _kernel(k, r).astype(complex) * mesh.cell_area
        kernel[0, 0] = self_cell_value(k, mesh.h)
        self._kernel_hat = np.fft.fft2(kernel)
        self._ix = mesh.indices[:, 0]
        self._iy = mesh.indices[:, 1]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.mesh.n, self.mesh.n)

    def apply(self, cell_values: np.ndarray) -> np.ndarray:
        grid = np.zeros(self._padded, dtype=complex)
        grid[self._ix, self._iy] = self.medium.values * cell_values
        conv = np.fft.ifft2(np.fft.fft2(grid) * self._kernel_hat)
        return conv[self._ix, self._iy]


def trace_and_normal_trace(
    k: Optional[float], mesh: VolumeMesh, medium: MediumField, boundary: BoundaryMesh
) -> Tuple[VolumeOperatorMatrix, VolumeOperatorMatrix]:
    """Boundary values and normal derivatives (outward nu of ``boundary``) of G_V."""
    _check_wavenumber(k)
    shape = (boundary.n, mesh.n)
    if mesh.is_empty or medium.is_zero:
        zero = np.zeros(shape, dtype=complex)
        return VolumeOperatorMatrix(zero, k), VolumeOperatorMatrix(zero.copy(), k)
    values = _point_entries(k, mesh, boundary.nodes) * medium.values[None, :]
    normal = _point_entries(k, mesh, boundary.nodes, normals=boundary.normals) * medium.values[None, :]
    return VolumeOperatorMatrix(values.astype(complex), k), VolumeOperatorMatrix(normal.astype(complex), k)


def volume_gradient_matrices(
    k: Optional[float], mesh: VolumeMesh, medium: MediumField, points: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Matrices for the x and y derivatives of G_V u at ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ex = np.tile([1.0, 0.0], (pts.shape[0], 1))
    ey = np.tile([0.0, 1.0], (pts.shape[0], 1))
    gx = _point_entries(k, mesh, pts, normals=ex) * medium.values[None, :]
    gy = _point_entries(k, mesh, pts, normals=ey) * medium.values[None, :]
    return gx, gy


def volume_far_field_rows(k: float, mesh: VolumeMesh, medium: MediumField, xhat: np.ndarray) -> np.ndarray:
    """Rows of int exp(-i k xhat . y) V(y) u(y) dy."""
    directions = np.atleast_2d(np.asarray(xhat, dtype=float))
    phase = np.exp(-1j * k * directions @ mesh.cell_centers.T)
    return phase * (medium.values * mesh.cell_area)[None, :]


def u_v_functional(mesh: VolumeMesh, medium: MediumField, phi: np.ndarray) -> complex:
    values = np.asarray(phi)
    if values.shape != (mesh.n,):
        raise GeometryError(f"expected {mesh.n} cell values, got shape {values.shape}")
    return complex(np.sum(medium.values * values) * mesh.cell_area)
