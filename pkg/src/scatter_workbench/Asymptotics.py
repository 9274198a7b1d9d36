"""Low-frequency calculus built from Laplace boundary operators.

    A = (I/2 + K~ + L + S~ W)^-1      B = (I/2 - K~')^-1
    F(g) = g - (K~ + L + S~ W) A g

F(g) takes boundary data together with its extension off the curve; for constant data
the extension is the constant. The exterior trace of (K~ + L + S~ W) A g is g, so F(g)
vanishes on the curve. In the plane F(1) is bounded, harmonic and zero on the curve,
hence identically zero, and L A(1) = 1 for every curve.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from scatter_workbench.BoundaryOperators import OperatorCache, potential_matrix
from scatter_workbench.ForwardSolver import evaluate_total_field
from scatter_workbench.errors import AdmissibilityError, FormulationError, GeometryError, OperatorError
from scatter_workbench.Geometry import BoundaryMesh, distance_to_curve, points_in_curve
from scatter_workbench.SpecialFunctions import C2
from scatter_workbench.VolumeOperators import assemble_volume, trace_and_normal_trace, u_v_functional

logger = logging.getLogger(__name__)

TERM_TAGS = ("1", "k", "k2lnk", "k2")
ILL_CONDITIONED = 1e12


def term_prefactor(tag: str, k: float) -> float:
    table = {
        "1": 1.0,
        "k": k,
        "k2lnk": k * k * np.log(k),
        "k2": k * k,
    }
    if tag not in table:
        raise OperatorError(f"unknown expansion term {tag!r}")
    return table[tag]


@dataclass(frozen=True)
class AsymptoticField:
    """Expansion terms at fixed probe points; ``evaluate(k)`` sums them with their prefactors."""

    points: np.ndarray
    terms: Dict[str, np.ndarray]
    k_validity: Tuple[float, float] = (0.0, 0.2)

    def __post_init__(self):
        unknown = set(self.terms) - set(TERM_TAGS)
        if unknown:
            raise OperatorError(f"unknown expansion terms {sorted(unknown)}")

    def evaluate(self, k: float) -> np.ndarray:
        out = np.zeros(self.points.shape[0], dtype=complex)
        for tag, values in self.terms.items():
            out += term_prefactor(tag, k) * values
        return out


class LaplaceCalculus:
    def __init__(self, mesh: BoundaryMesh, bc: str = "soft"):
        if bc not in ("soft", "hard"):
            raise FormulationError(f"calculus is built for soft or hard obstacles, got {bc!r}")
        self.mesh = mesh
        self.bc = bc
        self.operators = OperatorCache(mesh)
        n = mesh.n
        eye = np.eye(n)
        self.S = self.operators.laplace("S")
        self.K = self.operators.laplace("K")
        self.Kp = self.operators.laplace("Kp")
        self.L = self.operators.aux("L")
        self.W = self.operators.aux("W")
        self.soft_operator = 0.5 * eye + self.K + np.ones((n, 1)) @ self.L + self.S @ self.W
        self.hard_operator = 0.5 * eye - self.Kp
        self.A_matrix = self._invert(self.soft_operator, "I/2 + K~ + L + S~ W")
        self.B_matrix = self._invert(self.hard_operator, "I/2 - K~'")

    def _invert(self, matrix: np.ndarray, label: str) -> np.ndarray:
        cond = np.linalg.cond(matrix)
        if not np.isfinite(cond) or cond > ILL_CONDITIONED:
            raise GeometryError(f"{label} is near-singular on this curve (condition {cond:.2e})")
        logger.debug("inverted %s, condition %.3e", label, cond)
        return np.linalg.inv(matrix)

    def aux(self, kind: str) -> np.ndarray:
        return self.operators.aux(kind)

    def inverse_residuals(self) -> Tuple[float, float]:
        eye = np.eye(self.mesh.n)
        return (
            float(np.linalg.norm(self.A_matrix @ self.soft_operator - eye, 2)),
            float(np.linalg.norm(self.B_matrix @ self.hard_operator - eye, 2)),
        )

    @property
    def l_a_one(self) -> complex:
        return complex((self.L @ self.A_matrix @ np.ones(self.mesh.n))[0])

    def potentials(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Laplace single- and double-layer matrices at exterior points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.flatnonzero(points_in_curve(self.mesh.curve, pts))
        if inside.size:
            raise GeometryError(f"probe point(s) {inside.tolist()} lie inside the obstacle")
        dist = distance_to_curve(self.mesh.curve, pts)
        single = potential_matrix("single", None, self.mesh, pts, refine=True, distances=dist)
        double = potential_matrix("double", None, self.mesh, pts, refine=True, distances=dist)
        return single.real, double.real


def build_calculus(mesh: BoundaryMesh, bc: str = "soft") -> LaplaceCalculus:
    calculus = LaplaceCalculus(mesh, bc)
    res_a, res_b = calculus.inverse_residuals()
    logger.info("Laplace calculus on %d nodes: inverse residuals A %.1e, B %.1e", mesh.n, res_a, res_b)
    return calculus


def calF(
    calculus: LaplaceCalculus,
    boundary_data: np.ndarray,
    points: np.ndarray,
    extension: Optional[np.ndarray] = None,
) -> np.ndarray:
    """F(g) at exterior points; ``extension`` holds g off the curve at the same points."""
    data = np.asarray(boundary_data)
    if data.ndim == 0:
        data = np.full(calculus.mesh.n, data.item())
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if extension is None:
        if np.ptp(data) > 1e-14 * max(1.0, np.max(np.abs(data))):
            raise OperatorError("non-constant boundary data needs its off-curve extension")
        extension = np.full(pts.shape[0], data[0])
    single, double = calculus.potentials(pts)
    density = calculus.A_matrix @ data
    combination = double @ density + (calculus.L @ density)[0] + single @ (calculus.W @ density)
    return np.asarray(extension) - combination


@dataclass(frozen=True)
class SignReport:
    lower: float
    upper: float
    minimum: float
    maximum: float

    @property
    def passed(self) -> bool:
        return self.lower < self.minimum and self.maximum < self.upper


def sign_check_F1(calculus: LaplaceCalculus, points: np.ndarray) -> SignReport:
    """Check that F(1) stays strictly between 0 and 1 - L A(1) at the probes."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = np.flatnonzero(points_in_curve(calculus.mesh.curve, pts))
    if inside.size:
        raise GeometryError(f"probe point(s) {inside.tolist()} lie inside the obstacle")
    limit = 1.0 - calculus.l_a_one.real
    if abs(limit) <= 1e-8:
        raise AdmissibilityError(f"L A(1) = 1 within {abs(limit):.1e}: F(1) has no sign to preserve")
    values = calF(calculus, np.ones(calculus.mesh.n), pts).real
    lower, upper = sorted((0.0, limit))
    return SignReport(lower, upper, float(values.min()), float(values.max()))


def soft_leading_2d(calculus: LaplaceCalculus, points: np.ndarray) -> AsymptoticField:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    leading = calF(calculus, np.ones(calculus.mesh.n), pts)
    return AsymptoticField(pts, {"1": leading.astype(complex)}, (0.0, 0.2))


def _medium_parts(problem):
    """(volume mesh, contrast) of a forward problem, or (None, None) without a medium."""
    if problem is None or not problem.has_medium:
        return None, None
    return problem.volume, problem.medium


def hard_expansion_2d(
    calculus: LaplaceCalculus,
    problem,
    d: Sequence[float],
    points: np.ndarray,
    order: int = 2,
) -> AsymptoticField:
    """Sound-hard total field through k^2.

    The k^2 ln k and constant k^2 coefficients come from matching the outgoing monopole
    of strength k^2 (U_V(1) - |D|): (|D| - U_V(1)) / 2 pi and c2 (U_V(1) - |D|).
    """
    if order not in (0, 1, 2):
        raise OperatorError(f"expansion order {order} is not available")
    mesh = calculus.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    direction = np.asarray(d, dtype=float)
    terms: Dict[str, np.ndarray] = {"1": np.ones(pts.shape[0], dtype=complex)}
    if order == 0:
        return AsymptoticField(pts, terms)
    single, _ = calculus.potentials(pts)
    x_dot_d = pts @ direction
    d_dot_nu = mesh.normals @ direction
    terms["k"] = 1j * (x_dot_d + single @ (calculus.B_matrix @ d_dot_nu))
    if order == 1:
        return AsymptoticField(pts, terms)
    volume, medium = _medium_parts(problem)
    area = mesh.curve.area
    u_v = 0.0
    bracket = -0.5 * x_dot_d ** 2 - single @ (calculus.B_matrix @ ((mesh.nodes @ direction) * d_dot_nu))
    if volume is not None:
        ones = np.ones(volume.n)
        u_v = u_v_functional(volume, medium, ones)
        bracket = bracket + assemble_volume(None, volume, medium, pts).entries @ ones
        _, normal_trace = trace_and_normal_trace(None, volume, medium, mesh)
        bracket = bracket + single @ (calculus.B_matrix @ (normal_trace.entries @ ones))
    terms["k2lnk"] = np.full(pts.shape[0], (area - u_v) / (2 * np.pi), dtype=complex)
    terms["k2"] = (bracket + C2 * (u_v - area)).astype(complex)
    return AsymptoticField(pts, terms)


def soft_expansion_2d(
    calculus: LaplaceCalculus,
    problem,
    d: Sequence[float],
    points: np.ndarray,
    order: int = 2,
    consistent_kernels: bool = False,
) -> AsymptoticField:
    """Displayed terms of the sound-soft expansion, without the 1/ln k series.

    ``consistent_kernels`` swaps the |x - y| kernels of M and P for |x - y|^2.
    """
    if order not in (0, 1, 2):
        raise OperatorError(f"expansion order {order} is not available")
    mesh = calculus.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    direction = np.asarray(d, dtype=float)
    n = mesh.n
    ones = np.ones(n)
    f_one = calF(calculus, ones, pts)
    terms: Dict[str, np.ndarray] = {"1": f_one.astype(complex)}
    if order == 0:
        return AsymptoticField(pts, terms)
    g = mesh.nodes @ direction
    terms["k"] = 1j * calF(calculus, g, pts, extension=pts @ direction)
    if order == 1:
        return AsymptoticField(pts, terms)

    m_kind, p_kind = ("M2", "P2") if consistent_kernels else ("M", "P")
    m_pot, p_pot = (("M2_potential", "P2_potential") if consistent_kernels else ("M_potential", "P_potential"))
    A, W, S, L = calculus.A_matrix, calculus.W, calculus.S, calculus.L
    a_one = A @ ones
    dist = distance_to_curve(mesh.curve, pts)

    def pot(kind: str) -> np.ndarray:
        return potential_matrix(kind, None, mesh, pts, refine=True, distances=dist)

    def p_plus_mw(psi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        boundary = calculus.aux(p_kind) @ psi + calculus.aux(m_kind) @ (W @ psi)
        return boundary, pot(p_pot) @ psi + pot(m_pot) @ (W @ psi)

    volume, medium = _medium_parts(problem)
    u_v_f1 = 0.0
    f_one_on_cells = None
    if volume is not None:
        f_one_on_cells = calF(calculus, ones, volume.cell_centers)
        u_v_f1 = u_v_functional(volume, medium, f_one_on_cells)

    boundary, ext = p_plus_mw(a_one)
    terms["k2lnk"] = -(u_v_f1 / (2 * np.pi) * f_one + calF(calculus, boundary, pts, extension=ext))

    shifted = S @ a_one + C2 * (L @ a_one)[0]
    bracket = 0.5 * calF(calculus, g ** 2, pts, extension=(pts @ direction) ** 2)
    bracket = bracket - (1 + C2) * u_v_f1 * f_one
    if volume is not None:
        trace, _ = trace_and_normal_trace(None, volume, medium, mesh)
        g_on_points = assemble_volume(None, volume, medium, pts).entries @ f_one_on_cells
        bracket = bracket - calF(calculus, trace.entries @ f_one_on_cells, pts, extension=g_on_points)
        single_cells = potential_matrix("single", None, mesh, volume.cell_centers, refine=True).real
        shifted_on_cells = single_cells @ a_one + C2 * (L @ a_one)[0]
        f_shifted = calF(calculus, shifted, volume.cell_centers, extension=shifted_on_cells)
        bracket = bracket - u_v_functional(volume, medium, f_shifted) * f_one
    psi2 = A @ shifted - a_one
    boundary, ext = p_plus_mw(psi2)
    bracket = bracket - 2 * np.pi * calF(calculus, boundary, pts, extension=ext)
    q_part = -calculus.aux("Q") @ a_one + 2 * np.pi * calculus.aux("M") @ a_one - calculus.aux("N") @ (W @ a_one)
    q_ext = -pot("Q_potential") @ a_one + 2 * np.pi * pot("M_potential") @ a_one - pot("N_potential") @ (W @ a_one)
    bracket = bracket - calF(calculus, q_part, pts, extension=q_ext)
    terms["k2"] = -bracket
    return AsymptoticField(pts, terms)


def fit_exponent(ks: Sequence[float], remainders: Sequence[float], log_power: float = 0.0) -> float:
    """Least-squares slope of log(remainder / |ln k|^log_power) against log k."""
    k = np.asarray(ks, dtype=float)
    r = np.abs(np.asarray(remainders, dtype=float)) / np.abs(np.log(k)) ** log_power
    if np.any(r <= 0):
        raise OperatorError("remainders must be nonzero to fit an exponent")
    slope, _ = np.polyfit(np.log(k), np.log(r), 1)
    return float(slope)


def remainder_ladder(
    problem,
    calculus: LaplaceCalculus,
    d: Sequence[float],
    points: np.ndarray,
    ks: Iterable[float],
    order: int = 2,
) -> pd.DataFrame:
    """Forward solves against the low-frequency expansion on a wavenumber ladder.

    Returns one row per (k, probe) with the absolute remainder.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if problem.boundary is None:
        raise FormulationError("remainder ladders need an obstacle")
    bc = problem.config.bc
    if bc == "hard":
        expansion = hard_expansion_2d(calculus, problem, d, pts, order)
    else:
        expansion = soft_leading_2d(calculus, pts)
    rows = []
    for k in ks:
        solution = problem.solve(float(k), d)
        field_values = evaluate_total_field(solution, pts)
        remainder = np.abs(field_values - expansion.evaluate(float(k)))
        problem.release(float(k))
        for index, value in enumerate(remainder):
            rows.append({"k": float(k), "probe": index, "remainder": float(value)})
        logger.info("ladder k=%.4g: max remainder %.3e", k, remainder.max())
    return pd.DataFrame(rows, columns=["k", "probe", "remainder"])


def fitted_exponents(frame: pd.DataFrame, log_power: float = 0.0) -> pd.Series:
    """Per-probe exponent fits of a ladder frame."""
    fits = {
        probe: fit_exponent(group["k"].to_numpy(), group["remainder"].to_numpy(), log_power)
        for probe, group in frame.groupby("probe")
    }
    return pd.Series(fits, name="exponent")
