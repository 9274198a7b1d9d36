"""Invariant suites behind ``validate``: each returns a SuiteReport of measured checks."""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from scatter_workbench.Asymptotics import build_calculus, calF, fitted_exponents, remainder_ladder
from scatter_workbench.errors import WorkbenchError
from scatter_workbench.ForwardSolver import (
    Discretization,
    FarFieldTensor,
    ForwardProblem,
    MediumSpec,
    ScattererConfig,
    far_field,
    flux_identity,
    generate_dataset,
    mie_disc_farfield,
    reciprocity_gap,
    unit_vectors,
)
from scatter_workbench.Geometry import discretize_boundary, make_curve
from scatter_workbench.SamplingIndicators import SINGLE_DIRECTION, NoiseSpec, add_noise, indicator, truth_metrics
from scatter_workbench.Settings import BENCHMARK_BANDS, RunConfig

logger = logging.getLogger(__name__)

SUITES = ("mie", "reciprocity", "flux", "lowk", "operators", "reconstruction")
HARD_LADDER = (0.2, 0.1, 0.05, 0.025)
SOFT_LADDER = tuple(0.2 * 2.0 ** -j for j in range(11))
# (1, 0), (0, 1), (0, -1), (-1, 0); the last one is the single-direction benchmark
FOUR_DIRECTIONS_DEG = (0.0, 90.0, 270.0, 180.0)


@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: List[CheckResult] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def at_most(self, name: str, measured: float, tolerance: float, detail: str = "") -> CheckResult:
        check = CheckResult(name, float(measured), tolerance, bool(measured <= tolerance), detail)
        self.checks.append(check)
        logger.log(logging.INFO if check.passed else logging.WARNING, "%s: %s = %.3e (tol %.1e)",
                   "pass" if check.passed else "FAIL", name, measured, tolerance)
        return check

    def at_least(self, name: str, measured: float, bound: float, detail: str = "") -> CheckResult:
        check = CheckResult(name, float(measured), bound, bool(measured >= bound), detail)
        self.checks.append(check)
        logger.log(logging.INFO if check.passed else logging.WARNING, "%s: %s = %.3f (min %.2f)",
                   "pass" if check.passed else "FAIL", name, measured, bound)
        return check

    def failed(self, name: str, error: Exception) -> None:
        self.checks.append(CheckResult(name, float("nan"), float("nan"), False, f"{type(error).__name__}: {error}"))
        logger.error("FAIL: %s raised %s", name, error)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def mie_suite(n_boundary: int = 128, wavenumbers: Sequence[float] = (0.5, 1.0, 2.0), n_angles: int = 64) -> SuiteReport:
    report = SuiteReport("mie")
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    d = np.array([1.0, 0.0])
    disc = Discretization(n_boundary=n_boundary)
    for bc in ("soft", "hard"):
        problem = ForwardProblem(ScattererConfig(obstacle=make_curve("circle", (1.0,)), bc=bc), disc)
        for k in wavenumbers:
            name = f"{bc} disc k={k:g}"
            try:
                formulation = "soft_combined" if bc == "soft" else "hard_regularized"
                computed = far_field(problem.solve(k, d, formulation), angles)
                exact = mie_disc_farfield(k, 1.0, bc, d, angles)
                report.at_most(name, np.linalg.norm(computed - exact) / np.linalg.norm(exact), 1e-8)
            except WorkbenchError as exc:
                report.failed(name, exc)
    return report


def reciprocity_suite(config: RunConfig, k: float = 1.0, pairs: Sequence[Sequence[float]] = ((0.3, 2.1), (1.7, 4.0))) -> SuiteReport:
    report = SuiteReport("reciprocity")
    problem = ForwardProblem(config.scatterer.build(), config.discretization.build())
    for x_angle, d_angle in pairs:
        name = f"x={x_angle:g} d={d_angle:g}"
        try:
            report.at_most(name, reciprocity_gap(problem, k, x_angle, d_angle), 1e-6)
        except WorkbenchError as exc:
            report.failed(name, exc)
    return report


def flux_suite(config: RunConfig, k: float = 1.0, absorption: float = 0.2) -> SuiteReport:
    report = SuiteReport("flux")
    base = config.scatterer.build()
    if base.medium is None:
        report.failed("flux", WorkbenchError("the flux identity needs a medium"))
        return report
    disc = config.discretization.build()
    d = unit_vectors(config.dataset.directions)[0]
    q_real = base.contrast.q.real
    lossless = replace(base, contrast=MediumSpec(complex(q_real, 0.0)))
    lossy = replace(base, contrast=MediumSpec(complex(q_real, absorption)))
    try:
        flux = flux_identity(ForwardProblem(lossless, disc).solve(k, d))
        report.at_most("real V: |Im flux|", abs(flux.boundary_flux), 1e-6)
        flux = flux_identity(ForwardProblem(lossy, disc).solve(k, d))
        report.at_most(f"Im V={absorption:g}: relative gap", flux.relative_gap, 1e-4)
    except WorkbenchError as exc:
        report.failed("flux", exc)
    return report


def ladder_probes(config: ScattererConfig, count: int = 3, clearance: float = 0.8) -> np.ndarray:
    """Probes on a ring ``clearance`` beyond the obstacle, away from the lattice nodes."""
    radius = config.obstacle.circumradius + clearance
    if radius >= config.R:
        raise WorkbenchError(f"probe ring of radius {radius:.3g} leaves the ball of radius {config.R}")
    angles = 0.31 + 2 * np.pi * np.arange(count) / count
    return radius * unit_vectors(angles)


def lowk_suite(
    config: RunConfig,
    hard_ladder: Sequence[float] = HARD_LADDER,
    soft_ladder: Sequence[float] = SOFT_LADDER,
    min_exponent: float = 2.7,
    max_spread: float = 3.0,
) -> SuiteReport:
    """Remainder ladders: hard order 2 against k^3 |ln k|, soft leading term against C / |ln k|."""
    report = SuiteReport("lowk")
    base = config.scatterer.build()
    if base.obstacle is None:
        report.failed("lowk", WorkbenchError("low-frequency ladders need an obstacle"))
        return report
    disc = config.discretization.build()
    d = unit_vectors(config.dataset.directions)[0]
    mesh = discretize_boundary(base.obstacle, disc.n_boundary)
    probes = ladder_probes(base)
    frames = []
    for bc, ks in (("hard", hard_ladder), ("soft", soft_ladder)):
        problem = ForwardProblem(replace(base, bc=bc), disc)
        try:
            calculus = build_calculus(mesh, bc)
            frame = remainder_ladder(problem, calculus, d, probes, ks)
        except WorkbenchError as exc:
            report.failed(f"{bc} ladder", exc)
            continue
        frames.append(frame.assign(bc=bc))
        if bc == "hard":
            for probe, exponent in fitted_exponents(frame, log_power=1.0).items():
                report.at_least(f"hard probe {probe}: exponent of remainder / |ln k|", exponent, min_exponent)
        else:
            scaled = frame.assign(C=frame["remainder"] * np.abs(np.log(frame["k"])))
            for probe, group in scaled.groupby("probe"):
                spread = group["C"].max() / max(group["C"].min(), 1e-300)
                report.at_most(f"soft probe {probe}: spread of remainder * |ln k|", spread, max_spread)
    if frames:
        report.tables["ladder"] = pd.concat(frames, ignore_index=True)
    return report


def operators_suite(n_boundary: int = 256, n_probes: int = 500, seed: int = 0) -> SuiteReport:
    report = SuiteReport("operators")
    rng = np.random.default_rng(seed)
    for kind in ("circle", "kite", "rounded_square"):
        curve = make_curve(kind)
        mesh = discretize_boundary(curve, n_boundary)
        try:
            calculus = build_calculus(mesh, "soft")
        except WorkbenchError as exc:
            report.failed(f"{kind} calculus", exc)
            continue
        W, L = calculus.W, calculus.L
        report.at_most(f"{kind}: |L W|", np.max(np.abs(L @ W)), 1e-12)
        report.at_most(f"{kind}: |W W - W|", np.max(np.abs(W @ W - W)), 1e-12)
        res_a, res_b = calculus.inverse_residuals()
        report.at_most(f"{kind}: A inverse residual", res_a, 1e-10)
        report.at_most(f"{kind}: B inverse residual", res_b, 1e-10)
        report.at_most(f"{kind}: |1 - L A(1)|", abs(1.0 - calculus.l_a_one), 1e-8,
                       "F(1) is bounded, harmonic and zero on the curve")
        radii = curve.circumradius + 0.2 + 1.8 * rng.random(n_probes)
        probes = radii[:, None] * unit_vectors(2 * np.pi * rng.random(n_probes))
        values = calF(calculus, np.ones(mesh.n), probes)
        report.at_most(f"{kind}: max |F(1)| on {n_probes} probes", np.max(np.abs(values)), 1e-6)
    return report


def reconstruction_suite(config: RunConfig, level: float = 0.5, tolerance: float = 0.5, min_contrast: float = 2.0) -> SuiteReport:
    """Noisy benchmark reconstructions scored against the known obstacle and medium.

    The obstacle band is solved once with four incident directions; the single-direction
    indicators read its (-1, 0) column, noised on its own. The medium band uses (-1, 0) alone.
    """
    report = SuiteReport("reconstruction")
    base = config.scatterer.build()
    if base.obstacle is None or base.medium is None:
        report.failed("reconstruction", WorkbenchError("benchmark reconstructions need an obstacle and a medium"))
        return report
    problem = ForwardProblem(base, config.discretization.build())
    grid = config.grid.build()
    noise = config.noise or NoiseSpec()

    def _clean(band: str, directions_deg: Sequence[float]) -> FarFieldTensor:
        k_min, k_max, m = BENCHMARK_BANDS[band]
        return generate_dataset(
            base, problem.disc, config.dataset.angles, np.linspace(k_min, k_max, m),
            np.radians(directions_deg), threads=config.threads, problem=problem,
        )

    try:
        clean = _clean("obstacle", FOUR_DIRECTIONS_DEG)
        column = [FOUR_DIRECTIONS_DEG.index(180.0)]
        single = FarFieldTensor(clean.values[:, :, column], clean.angles, clean.wavenumbers, clean.directions[column])
        single = add_noise(single, noise)
        for kind in SINGLE_DIRECTION:
            metrics = truth_metrics(indicator(kind, single, grid, 0, config.threads), base.obstacle, level=level)
            report.at_most(f"{kind}: argmax distance to the obstacle centroid", metrics.get("argmax_error", np.inf), tolerance)
        tensor = add_noise(clean, noise)
        metrics = truth_metrics(indicator("liuN", tensor, grid, threads=config.threads), base.obstacle, level=level)
        report.at_least("liuN: obstacle coverage", metrics.get("coverage", 0.0), 0.5)
        centroid_error = metrics.get("mask_centroid_error")
        report.at_most("liuN: mask centroid distance", np.inf if centroid_error is None else centroid_error, tolerance)
    except WorkbenchError as exc:
        report.failed("obstacle band", exc)
    try:
        tensor = add_noise(_clean("medium", (180.0,)), noise)
        for kind in SINGLE_DIRECTION:
            metrics = truth_metrics(indicator(kind, tensor, grid, 0, config.threads), medium=base.medium, level=level)
            report.at_least(f"{kind}: medium contrast", metrics.get("medium_contrast", 0.0), min_contrast)
    except WorkbenchError as exc:
        report.failed("medium band", exc)
    return report


def run_suite(name: str, config: Optional[RunConfig] = None) -> SuiteReport:
    config = config or RunConfig()
    runners: Dict[str, Callable[[], SuiteReport]] = {
        "mie": lambda: mie_suite(),
        "reciprocity": lambda: reciprocity_suite(config),
        "flux": lambda: flux_suite(config),
        "lowk": lambda: lowk_suite(config),
        "operators": lambda: operators_suite(config.discretization.n_boundary),
        "reconstruction": lambda: reconstruction_suite(config),
    }
    if name not in runners:
        raise WorkbenchError(f"unknown suite {name!r}; expected one of {SUITES}")
    logger.info("running validation suite %s", name)
    return runners[name]()
