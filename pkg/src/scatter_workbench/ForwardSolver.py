"""Forward scattering by an obstacle embedded in an inhomogeneous medium.

The total field in the exterior of the obstacle is represented as

    u = u_i + k^2 G_V u + S(M_s psi) + K(M_d psi)

where S and K are the single- and double-layer potentials and M_s, M_d are fixed
N x N density maps selected by the formulation:

    soft_combined     M_s = -i I,                 M_d = I
    soft_logk         M_s = W - (2 pi / ln k) I,  M_d = I
    hard_regularized  M_s = I,                    M_d = i k^3 S_i^2
    hard_plain        M_s = I,                    M_d = 0

Collocating the representation at the cell centers and the boundary condition at the
boundary nodes gives one coupled linear system for (u at cells, psi at nodes).
"""
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres
from tqdm import tqdm

from scatter_workbench.BoundaryOperators import (
    OperatorCache,
    far_field_row,
    potential_gradient_matrices,
    potential_matrix,
)
from scatter_workbench.errors import (
    ConditioningError,
    DatasetError,
    FormulationError,
    GeometryError,
    ResonanceError,
    TruncationError,
    WorkbenchError,
)
from scatter_workbench.Geometry import (
    BoundaryCurve,
    BoundaryMesh,
    build_volume_mesh,
    discretize_boundary,
    distance_to_curve,
    empty_volume_mesh,
    points_in_curve,
)
from scatter_workbench.VolumeOperators import (
    VolumeConvolution,
    assemble_volume,
    medium_from_csv,
    trace_and_normal_trace,
    uniform_medium,
    volume_far_field_rows,
    volume_gradient_matrices,
)

logger = logging.getLogger(__name__)

BC_KINDS = ("soft", "hard", "none")
FORMULATIONS = ("soft_combined", "soft_logk", "hard_regularized", "hard_plain", "medium", "free")
LOGK_THRESHOLD = 0.2
DEFAULT_DENSE_LIMIT = 6000
RESONANCE_RCOND = 1e-8
SINGULAR_RCOND = 1e-14


def unit_vectors(angles: Sequence[float]) -> np.ndarray:
    a = np.atleast_1d(np.asarray(angles, dtype=float))
    return np.stack([np.cos(a), np.sin(a)], axis=1)


def _as_directions(xhat) -> np.ndarray:
    arr = np.asarray(xhat, dtype=float)
    if arr.ndim == 1 and arr.shape != (2,):
        return unit_vectors(arr)
    return np.atleast_2d(arr)


@dataclass(frozen=True)
class MediumSpec:
    """Contrast on the medium cells: constant ``q`` or a per-cell CSV file."""

    q: complex = 0.5
    values_file: Optional[str] = None


@dataclass(frozen=True)
class ScattererConfig:
    obstacle: Optional[BoundaryCurve] = None
    bc: str = "soft"
    medium: Optional[BoundaryCurve] = None
    contrast: MediumSpec = MediumSpec()
    R: float = 6.0

    def __post_init__(self):
        if self.bc not in BC_KINDS:
            raise FormulationError(f"boundary condition must be one of {BC_KINDS}, got {self.bc!r}")
        if self.bc == "none" and self.obstacle is not None:
            raise FormulationError("an obstacle needs a soft or hard boundary condition")
        for curve, what in ((self.obstacle, "obstacle"), (self.medium, "medium")):
            if curve is not None and curve.circumradius >= self.R:
                raise GeometryError(f"{what} is not contained in the ball of radius R={self.R}")
        if self.obstacle is None and self.medium is None:
            logger.warning("configuration has neither obstacle nor medium: the scattered field is zero")

    def translated(self, shift: Sequence[float]) -> "ScattererConfig":
        radius = self.R + float(np.hypot(*shift))
        return replace(
            self,
            obstacle=self.obstacle.translated(shift) if self.obstacle else None,
            medium=self.medium.translated(shift) if self.medium else None,
            R=radius,
        )

    def rotated(self, angle: float) -> "ScattererConfig":
        return replace(
            self,
            obstacle=self.obstacle.rotated(angle) if self.obstacle else None,
            medium=self.medium.rotated(angle) if self.medium else None,
        )


@dataclass(frozen=True)
class Discretization:
    n_boundary: int = 256
    h_volume: float = 0.05
    dense_limit: int = field(default_factory=lambda: int(os.getenv("SCATTER_DENSE_LIMIT", DEFAULT_DENSE_LIMIT)))
    gmres_tol: float = 1e-12
    gmres_restart: int = 200
    gmres_maxiter: int = 50


@dataclass(frozen=True)
class ForwardSolution:
    k: float
    d: np.ndarray
    u_cells: np.ndarray
    density: Optional[np.ndarray]
    formulation: str
    residual: float
    rcond: Optional[float] = None
    iterations: int = 0
    elapsed: float = 0.0
    single_density: Optional[np.ndarray] = field(default=None, repr=False)
    double_density: Optional[np.ndarray] = field(default=None, repr=False)
    problem: Any = field(default=None, repr=False, compare=False)


@dataclass
class FarFieldTensor:
    """Far-field data indexed (observation l, wavenumber m, direction n); angles in radians."""

    values: np.ndarray
    angles: np.ndarray
    wavenumbers: np.ndarray
    directions: np.ndarray
    noise: Optional[Dict[str, Any]] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    # (angles, directions) in degrees as read from an archive; written back verbatim while they still match
    axes_deg: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.angles = np.asarray(self.angles, dtype=float)
        self.wavenumbers = np.asarray(self.wavenumbers, dtype=float)
        self.directions = np.asarray(self.directions, dtype=float)
        expected = (self.angles.size, self.wavenumbers.size, self.directions.size)
        if self.values.shape != expected:
            raise GeometryError(f"far-field values have shape {self.values.shape}, axes give {expected}")
        if np.any(self.wavenumbers <= 0) or np.any(np.diff(self.wavenumbers) <= 0):
            raise GeometryError("wavenumbers must be positive and strictly increasing")

    @property
    def observation_vectors(self) -> np.ndarray:
        return unit_vectors(self.angles)

    @property
    def direction_vectors(self) -> np.ndarray:
        return unit_vectors(self.directions)


def plane_wave(k: float, d: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.exp(1j * k * (np.atleast_2d(points) @ d))


class _CoupledSystem:
    """The block system of one (problem, k, formulation); solves for many directions."""

    def __init__(self, problem: "ForwardProblem", k: float, formulation: str):
        self.problem = problem
        self.k = k
        self.formulation = formulation
        self.n_cells = problem.volume.n if problem.has_medium else 0
        self.n_nodes = problem.boundary.n if problem.boundary is not None else 0
        self._build()

    def _density_maps(self) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        n, k = self.n_nodes, self.k
        eye = np.eye(n)
        if self.formulation == "soft_combined":
            return -1j * eye, eye
        if self.formulation == "soft_logk":
            w = self.problem.operators.aux("W")
            return w - (2 * np.pi / np.log(k)) * eye, eye
        if self.formulation == "hard_regularized":
            s_i = self.problem.imaginary_single()
            return eye, 1j * k ** 3 * (s_i @ s_i)
        if self.formulation == "hard_plain":
            return eye, None
        return None, None

    def _build(self):
        p, k = self.problem, self.k
        nc, nb = self.n_cells, self.n_nodes
        self.single_map, self.double_map = self._density_maps() if nb else (None, None)
        hard = self.formulation.startswith("hard")
        if nb:
            ops = p.operators
            eye = np.eye(nb)
            if hard:
                block = (ops.helmholtz("Kp", k) - 0.5 * eye) @ self.single_map
                if self.double_map is not None:
                    block = block + ops.helmholtz("T", k) @ self.double_map
            else:
                block = ops.helmholtz("S", k) @ self.single_map + (ops.helmholtz("K", k) + 0.5 * eye) @ self.double_map
            self.boundary_block = block
        if nc and nb:
            centers = p.volume.cell_centers
            dist = p.cell_distances
            coupling = potential_matrix("single", k, p.boundary, centers, refine=True, distances=dist) @ self.single_map
            if self.double_map is not None:
                double = potential_matrix("double", k, p.boundary, centers, refine=True, distances=dist)
                coupling = coupling + double @ self.double_map
            self.cells_from_boundary = coupling
            trace, normal_trace = trace_and_normal_trace(k, p.volume, p.medium, p.boundary)
            self.boundary_from_cells = k ** 2 * (normal_trace.entries if hard else trace.entries)
        self.dense = nc + nb <= p.disc.dense_limit
        self.rcond: Optional[float] = None
        if nc:
            if self.dense:
                self.volume_matrix = assemble_volume(k, p.volume, p.medium, "self").entries
            else:
                self.convolution = VolumeConvolution(k, p.volume, p.medium)
        if self.dense:
            self._factor_dense()
        else:
            self._boundary_lu = lu_factor(self.boundary_block) if nb else None
        logger.debug(
            "coupled system k=%.4g %s: %d cells, %d nodes, %s", k, self.formulation, nc, nb,
            "dense LU" if self.dense else "GMRES",
        )

    def _full_matrix(self) -> np.ndarray:
        nc, nb = self.n_cells, self.n_nodes
        a = np.zeros((nc + nb, nc + nb), dtype=complex)
        if nc:
            a[:nc, :nc] = np.eye(nc) - self.k ** 2 * self.volume_matrix
        if nb:
            a[nc:, nc:] = self.boundary_block
        if nc and nb:
            a[:nc, nc:] = -self.cells_from_boundary
            a[nc:, :nc] = self.boundary_from_cells
        return a

    def _factor_dense(self):
        matrix = self._full_matrix()
        self.matrix = matrix
        if matrix.size == 0:
            self._lu = None
            return
        self._lu = lu_factor(matrix, check_finite=False)
        gecon = get_lapack_funcs("gecon", (matrix,))
        anorm = np.linalg.norm(matrix, 1)
        rcond, _ = gecon(self._lu[0], anorm, norm="1")
        self.rcond = float(rcond)
        if self.formulation == "hard_plain" and self.rcond < RESONANCE_RCOND:
            raise ResonanceError(
                f"k={self.k} is close to an interior Dirichlet eigenvalue; use the regularized formulation",
                self.rcond,
            )
        if self.rcond < SINGULAR_RCOND:
            raise ConditioningError(f"coupled system is numerically singular at k={self.k}", self.rcond)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        nc = self.n_cells
        u, psi = x[:nc], x[nc:]
        out = np.empty_like(x, dtype=complex)
        if nc:
            vol = self.volume_matrix @ u if self.dense else self.convolution.apply(u)
            out[:nc] = u - self.k ** 2 * vol
            if self.n_nodes:
                out[:nc] -= self.cells_from_boundary @ psi
        if self.n_nodes:
            out[nc:] = self.boundary_block @ psi
            if nc:
                out[nc:] += self.boundary_from_cells @ u
        return out

    def _preconditioner(self, x: np.ndarray) -> np.ndarray:
        out = np.array(x, dtype=complex, copy=True)
        if self._boundary_lu is not None:
            out[self.n_cells:] = lu_solve(self._boundary_lu, out[self.n_cells:])
        return out

    def rhs(self, d: np.ndarray) -> np.ndarray:
        p, k = self.problem, self.k
        parts = []
        if self.n_cells:
            parts.append(plane_wave(k, d, p.volume.cell_centers))
        if self.n_nodes:
            incident = plane_wave(k, d, p.boundary.nodes)
            if self.formulation.startswith("hard"):
                parts.append(-1j * k * (p.boundary.normals @ d) * incident)
            else:
                parts.append(-incident)
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)

    def solve(self, d: np.ndarray) -> Tuple[np.ndarray, float, int]:
        b = self.rhs(d)
        if b.size == 0:
            return b, 0.0, 0
        iterations = 0
        if self.dense:
            x = lu_solve(self._lu, b, check_finite=False)
        else:
            size = b.size
            counter = {"n": 0}

            def _count(_):
                counter["n"] += 1

            op = LinearOperator((size, size), matvec=self.matvec, dtype=complex)
            prec = LinearOperator((size, size), matvec=self._preconditioner, dtype=complex)
            x, info = gmres(
                op, b, rtol=self.problem.disc.gmres_tol, restart=self.problem.disc.gmres_restart,
                maxiter=self.problem.disc.gmres_maxiter, M=prec, callback=_count, callback_type="pr_norm",
            )
            iterations = counter["n"]
            if info != 0:
                logger.warning("GMRES stopped after %d iterations without reaching rtol (info=%d)", iterations, info)
        residual = float(np.linalg.norm(self.matvec(x) - b) / max(np.linalg.norm(b), 1e-300))
        return x, residual, iterations


class ForwardProblem:
    """Meshes, medium and operator caches of one scatterer configuration."""

    def __init__(self, config: ScattererConfig, disc: Discretization = Discretization()):
        self.config = config
        self.disc = disc
        self.boundary: Optional[BoundaryMesh] = None
        self.operators: Optional[OperatorCache] = None
        if config.obstacle is not None:
            self.boundary = discretize_boundary(config.obstacle, disc.n_boundary)
            self.operators = OperatorCache(self.boundary)
        if config.medium is not None:
            self.volume = build_volume_mesh(config.medium, config.obstacle, disc.h_volume)
        else:
            self.volume = empty_volume_mesh(disc.h_volume)
        if config.contrast.values_file:
            self.medium = medium_from_csv(self.volume, config.contrast.values_file)
        else:
            self.medium = uniform_medium(self.volume, config.contrast.q)
        self.cell_distances = None
        if self.boundary is not None and self.has_medium:
            self.cell_distances = distance_to_curve(config.obstacle, self.volume.cell_centers)
        self._lock = threading.Lock()
        self._systems: Dict[Tuple[float, str], _CoupledSystem] = {}

    @property
    def has_medium(self) -> bool:
        return not self.volume.is_empty and not self.medium.is_zero

    def imaginary_single(self) -> np.ndarray:
        return self.operators.helmholtz("S", "i")

    def formulation_for(self, k: float, regularized: bool = True) -> str:
        if self.boundary is None:
            return "medium" if self.has_medium else "free"
        if self.config.bc == "soft":
            return "soft_logk" if k < LOGK_THRESHOLD else "soft_combined"
        return "hard_regularized" if regularized else "hard_plain"

    def _check_formulation(self, k: float, formulation: str) -> None:
        if formulation not in FORMULATIONS:
            raise FormulationError(f"unknown formulation {formulation!r}")
        if not k > 0:
            raise FormulationError(f"wavenumber must be positive, got {k}")
        if self.boundary is None:
            return
        if formulation.startswith("soft") and self.config.bc != "soft":
            raise FormulationError(f"{formulation} needs a sound-soft obstacle, config has bc={self.config.bc}")
        if formulation.startswith("hard") and self.config.bc != "hard":
            raise FormulationError(f"{formulation} needs a sound-hard obstacle, config has bc={self.config.bc}")
        if formulation in ("medium", "free"):
            raise FormulationError(f"{formulation} cannot be used with an obstacle")
        if formulation == "soft_logk" and (k >= 1.0 or abs(np.log(k)) <= 0.1):
            raise FormulationError(f"the log-kernel formulation needs 0 < k < 1 with |ln k| > 0.1, got k={k}; use solve_soft")

    def system(self, k: float, formulation: str) -> _CoupledSystem:
        self._check_formulation(k, formulation)
        key = (float(k), formulation)
        with self._lock:
            cached = self._systems.get(key)
        if cached is not None:
            return cached
        system = _CoupledSystem(self, float(k), formulation)
        with self._lock:
            return self._systems.setdefault(key, system)

    def release(self, k: float) -> None:
        with self._lock:
            for key in list(self._systems):
                if key[0] == float(k):
                    del self._systems[key]

    def solve(self, k: float, d: Sequence[float], formulation: Optional[str] = None) -> ForwardSolution:
        formulation = formulation or self.formulation_for(k)
        direction = np.asarray(d, dtype=float)
        if abs(np.linalg.norm(direction) - 1.0) > 1e-12:
            raise GeometryError("incident direction must be a unit vector")
        start = time.perf_counter()
        system = self.system(k, formulation)
        x, residual, iterations = system.solve(direction)
        nc = system.n_cells
        psi = x[nc:] if system.n_nodes else None
        single = system.single_map @ psi if psi is not None and system.single_map is not None else None
        double = system.double_map @ psi if psi is not None and system.double_map is not None else None
        if nc:
            u_cells = x[:nc]
        else:
            u_cells = plane_wave(k, direction, self.volume.cell_centers) if self.volume.n else np.zeros(0, dtype=complex)
        elapsed = time.perf_counter() - start
        logger.info(
            "solved k=%.4g %s: %d unknowns, residual %.2e, rcond %s, %.2fs",
            k, formulation, x.size, residual,
            f"{system.rcond:.2e}" if system.rcond is not None else "n/a", elapsed,
        )
        return ForwardSolution(
            k=float(k),
            d=direction,
            u_cells=u_cells,
            density=psi,
            formulation=formulation,
            single_density=single,
            double_density=double,
            residual=residual,
            rcond=system.rcond,
            iterations=iterations,
            elapsed=elapsed,
            problem=self,
        )


def _problem(config: ScattererConfig, disc: Discretization) -> ForwardProblem:
    return ForwardProblem(config, disc)


def solve_soft(k: float, d: Sequence[float], config: ScattererConfig, disc: Discretization = Discretization()) -> ForwardSolution:
    problem = _problem(config, disc)
    return problem.solve(k, d, problem.formulation_for(k) if problem.boundary is None else "soft_combined")


def solve_soft_logk(k: float, d: Sequence[float], config: ScattererConfig, disc: Discretization = Discretization()) -> ForwardSolution:
    problem = _problem(config, disc)
    return problem.solve(k, d, problem.formulation_for(k) if problem.boundary is None else "soft_logk")


def solve_hard(
    k: float,
    d: Sequence[float],
    config: ScattererConfig,
    disc: Discretization = Discretization(),
    regularized: bool = True,
) -> ForwardSolution:
    problem = _problem(config, disc)
    if problem.boundary is None:
        return problem.solve(k, d)
    return problem.solve(k, d, "hard_regularized" if regularized else "hard_plain")


def solve(k: float, d: Sequence[float], config: ScattererConfig, disc: Discretization = Discretization()) -> ForwardSolution:
    """Solve with the default formulation for the configuration and wavenumber."""
    return _problem(config, disc).solve(k, d)


def far_field(solution: ForwardSolution, xhat) -> np.ndarray:
    """Far-field pattern at the observation directions (unit vectors or angles in radians)."""
    problem: ForwardProblem = solution.problem
    directions = _as_directions(xhat)
    k = solution.k
    out = np.zeros(directions.shape[0], dtype=complex)
    if problem.has_medium:
        out += k ** 2 * volume_far_field_rows(k, problem.volume, problem.medium, directions) @ solution.u_cells
    if solution.density is not None:
        single, double = solution.single_density, solution.double_density
        out += far_field_row("single", k, problem.boundary, directions) @ single
        if double is not None:
            out += far_field_row("double", k, problem.boundary, directions) @ double
    return out


def _check_exterior(problem: ForwardProblem, pts: np.ndarray) -> None:
    if problem.config.obstacle is not None:
        inside = np.flatnonzero(points_in_curve(problem.config.obstacle, pts))
        if inside.size:
            raise GeometryError(f"point(s) {inside.tolist()} lie inside the obstacle")


def evaluate_scattered_field(solution: ForwardSolution, points: np.ndarray) -> np.ndarray:
    problem: ForwardProblem = solution.problem
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _check_exterior(problem, pts)
    k = solution.k
    out = np.zeros(pts.shape[0], dtype=complex)
    incident = plane_wave(k, solution.d, pts)
    on_cell = np.zeros(pts.shape[0], dtype=bool)
    if problem.has_medium:
        diff = pts[:, None, :] - problem.volume.cell_centers[None, :, :]
        match = np.hypot(diff[..., 0], diff[..., 1]) < 1e-14 * max(1.0, problem.volume.h)
        on_cell = np.any(match, axis=1)
        if np.any(on_cell):
            out[on_cell] = solution.u_cells[np.argmax(match[on_cell], axis=1)] - incident[on_cell]
        rest = ~on_cell
        if np.any(rest):
            vol = assemble_volume(k, problem.volume, problem.medium, pts[rest]).entries
            out[rest] += k ** 2 * vol @ solution.u_cells
    rest = ~on_cell
    if solution.density is not None and np.any(rest):
        single, double = solution.single_density, solution.double_density
        far = pts[rest]
        out[rest] += potential_matrix("single", k, problem.boundary, far, refine=True) @ single
        if double is not None:
            out[rest] += potential_matrix("double", k, problem.boundary, far, refine=True) @ double
    return out


def evaluate_total_field(solution: ForwardSolution, points: np.ndarray) -> np.ndarray:
    """Total field anywhere in the exterior of the obstacle, via the representation formula."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return plane_wave(solution.k, solution.d, pts) + evaluate_scattered_field(solution, pts)


def evaluate_total_gradient(solution: ForwardSolution, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of the total field at points away from the obstacle and the cells."""
    problem: ForwardProblem = solution.problem
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k = solution.k
    incident = plane_wave(k, solution.d, pts)
    gx = 1j * k * solution.d[0] * incident
    gy = 1j * k * solution.d[1] * incident
    if problem.has_medium:
        vx, vy = volume_gradient_matrices(k, problem.volume, problem.medium, pts)
        gx = gx + k ** 2 * vx @ solution.u_cells
        gy = gy + k ** 2 * vy @ solution.u_cells
    if solution.density is not None:
        single, double = solution.single_density, solution.double_density
        sx, sy = potential_gradient_matrices("single", k, problem.boundary, pts)
        gx, gy = gx + sx @ single, gy + sy @ single
        if double is not None:
            dx, dy = potential_gradient_matrices("double", k, problem.boundary, pts)
            gx, gy = gx + dx @ double, gy + dy @ double
    return gx, gy


@dataclass(frozen=True)
class FluxReport:
    boundary_flux: float
    volume_absorption: float

    @property
    def gap(self) -> float:
        return abs(self.boundary_flux - self.volume_absorption)

    @property
    def relative_gap(self) -> float:
        return self.gap / max(abs(self.volume_absorption), 1e-300)


def flux_identity(solution: ForwardSolution, radius: Optional[float] = None, n_points: Optional[int] = None) -> FluxReport:
    """Im of the circle integral of u d_r conj(u) against k^2 int Im V |u|^2."""
    problem: ForwardProblem = solution.problem
    r = radius if radius is not None else problem.config.R
    for curve in (problem.config.obstacle, problem.config.medium):
        if curve is not None and curve.circumradius >= r:
            raise GeometryError(f"flux circle of radius {r} intersects the scatterer")
    k = solution.k
    m = n_points or int(max(256, 2 * np.ceil(2 * k * r) + 64))
    theta = 2 * np.pi * np.arange(m) / m
    normals = unit_vectors(theta)
    pts = r * normals
    u = evaluate_total_field(solution, pts)
    gx, gy = evaluate_total_gradient(solution, pts)
    du = gx * normals[:, 0] + gy * normals[:, 1]
    boundary = float(np.imag(np.sum(u * np.conj(du))) * r * 2 * np.pi / m)
    volume = 0.0
    if problem.has_medium:
        volume = float(
            k ** 2 * np.sum(problem.medium.values.imag * np.abs(solution.u_cells) ** 2) * problem.volume.cell_area
        )
    return FluxReport(boundary, volume)


def reciprocity_gap(problem: ForwardProblem, k: float, x_angle: float, d_angle: float) -> float:
    """|u_inf(x; d) - u_inf(-d; -x)| relative to the larger modulus."""
    forward = far_field(problem.solve(k, unit_vectors(d_angle)[0]), [x_angle])[0]
    backward = far_field(problem.solve(k, -unit_vectors(x_angle)[0]), unit_vectors(d_angle + np.pi))[0]
    return float(abs(forward - backward) / max(abs(forward), abs(backward), 1e-300))


def mie_disc_farfield(k: float, a: float, bc: str, d: Sequence[float], angles) -> np.ndarray:
    """Partial-wave far field of a disc of radius ``a`` centered at the origin."""
    if not k * a > 0:
        raise TruncationError("the partial-wave series needs k a > 0")
    if bc not in ("soft", "hard"):
        raise FormulationError(f"disc oracle supports soft and hard, got {bc!r}")
    ka = k * a
    n_max = int(np.ceil(ka)) + 40
    orders = np.arange(n_max + 1)
    with np.errstate(all="ignore"):
        if bc == "soft":
            num, den = special.jv(orders, ka), special.hankel1(orders, ka)
        else:
            num, den = special.jvp(orders, ka), special.h1vp(orders, ka)
        coeff = np.where(np.isfinite(den) & (den != 0), -num / den, 0.0)
    if abs(coeff[-1]) > 1e-14:
        raise TruncationError(f"partial-wave tail {abs(coeff[-1]):.2e} at order {n_max}; increase n_max")
    directions = _as_directions(angles)
    theta = np.arctan2(directions[:, 1], directions[:, 0])
    theta_d = np.arctan2(d[1], d[0])
    phase = np.cos(np.outer(theta - theta_d, orders[1:]))
    series = coeff[0] + 2.0 * phase @ coeff[1:]
    return -4j * series


def generate_dataset(
    config: ScattererConfig,
    disc: Discretization,
    angles: Sequence[float],
    wavenumbers: Sequence[float],
    directions: Sequence[float],
    threads: int = 1,
    problem: Optional[ForwardProblem] = None,
    provenance: Optional[Dict[str, Any]] = None,
) -> FarFieldTensor:
    """Far fields for every (wavenumber, direction) pair; angles and directions in radians."""
    angles = np.asarray(angles, dtype=float)
    ks = np.asarray(wavenumbers, dtype=float)
    dirs = np.asarray(directions, dtype=float)
    if angles.size == 0 or ks.size == 0 or dirs.size == 0:
        raise GeometryError("dataset axes must be nonempty")
    if np.any(np.diff(ks) <= 0):
        raise GeometryError("wavenumbers must be strictly increasing")
    problem = problem or ForwardProblem(config, disc)
    xhat = unit_vectors(angles)
    dvec = unit_vectors(dirs)
    values = np.zeros((angles.size, ks.size, dirs.size), dtype=complex)
    progress = tqdm(total=ks.size * dirs.size, desc="far fields", unit="solve", disable=None)

    def _column(m: int) -> List[np.ndarray]:
        out = []
        for n in range(dirs.size):
            try:
                solution = problem.solve(ks[m], dvec[n])
                out.append(far_field(solution, xhat))
            except WorkbenchError as exc:
                raise DatasetError(m, n, exc) from exc
            logger.info("far field m=%d (k=%.4g) n=%d done", m, ks[m], n)
            progress.update(1)
        problem.release(ks[m])
        return out

    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                columns = list(pool.map(_column, range(ks.size)))
        else:
            columns = [_column(m) for m in range(ks.size)]
    finally:
        progress.close()
    for m, column in enumerate(columns):
        for n, data in enumerate(column):
            values[:, m, n] = data
    return FarFieldTensor(values, angles, ks, dirs, None, dict(provenance or {}))
