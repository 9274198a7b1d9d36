import numpy as np
import pandas as pd
import pytest
from scipy import special

from scatter_workbench.Asymptotics import (
    AsymptoticField,
    build_calculus,
    calF,
    fit_exponent,
    fitted_exponents,
    hard_expansion_2d,
    remainder_ladder,
    sign_check_F1,
    soft_expansion_2d,
    soft_leading_2d,
    term_prefactor,
)
from scatter_workbench.errors import AdmissibilityError, FormulationError, GeometryError, OperatorError
from scatter_workbench.ForwardSolver import Discretization, ForwardProblem, MediumSpec, ScattererConfig, unit_vectors
from scatter_workbench.Geometry import discretize_boundary, make_curve

PROBE_ANGLES = np.array([0.31, 2.4, 4.5])
PROBES = 1.8 * unit_vectors(PROBE_ANGLES)
E1 = np.array([1.0, 0.0])


@pytest.fixture
def circle_calculus(circle_mesh):
    return build_calculus(circle_mesh, "hard")


def _hard_disc_total_field(k, points):
    """Partial-wave total field of the sound-hard unit disc for d = (1, 0)."""
    r = np.hypot(points[:, 0], points[:, 1])
    theta = np.arctan2(points[:, 1], points[:, 0])
    orders = np.arange(-30, 31)
    coeff = special.jvp(orders, k) / special.h1vp(orders, k)
    radial = special.jv(orders, k * r[:, None])
    outgoing = special.hankel1(orders, k * r[:, None])
    return (1j ** orders * (radial - coeff * outgoing) * np.exp(1j * np.outer(theta, orders))).sum(axis=1)


def test_density_of_one_on_the_unit_circle(circle_calculus):
    np.testing.assert_allclose(circle_calculus.A_matrix @ np.ones(64), 1.0 / (2 * np.pi), atol=1e-12)
    assert circle_calculus.l_a_one == pytest.approx(1.0, abs=1e-12)
    res_a, res_b = circle_calculus.inverse_residuals()
    assert res_a <= 1e-10 and res_b <= 1e-10


@pytest.mark.parametrize("curve", ["circle", "kite", "rounded_square"])
def test_F_of_one_vanishes_outside_any_curve(curve):
    shape = make_curve(curve)
    calculus = build_calculus(discretize_boundary(shape, 128))
    probes = (shape.circumradius + 0.5) * unit_vectors(np.linspace(0, 2 * np.pi, 7, endpoint=False))
    assert np.max(np.abs(calF(calculus, np.ones(128), probes))) <= 1e-8
    assert abs(1.0 - calculus.l_a_one) <= 1e-8


def test_F_of_a_linear_function_on_the_unit_circle(circle_calculus, circle_mesh):
    x1 = PROBES[:, 0]
    r2 = np.sum(PROBES ** 2, axis=1)
    values = calF(circle_calculus, circle_mesh.nodes[:, 0], PROBES, extension=x1)
    np.testing.assert_allclose(values, x1 - x1 / r2, atol=1e-10)


def test_F_needs_an_extension_for_varying_data(circle_calculus, circle_mesh):
    with pytest.raises(OperatorError):
        calF(circle_calculus, circle_mesh.nodes[:, 0], PROBES)


def test_probes_inside_the_obstacle_are_rejected(circle_calculus):
    with pytest.raises(GeometryError):
        calF(circle_calculus, np.ones(64), [[0.1, 0.2]])
    with pytest.raises(GeometryError):
        sign_check_F1(circle_calculus, [[0.1, 0.2]])


def test_sign_check_reports_inadmissible_plane_setting(circle_calculus):
    with pytest.raises(AdmissibilityError):
        sign_check_F1(circle_calculus, PROBES)


def test_soft_leading_term_is_zero(circle_mesh):
    field = soft_leading_2d(build_calculus(circle_mesh, "soft"), PROBES)
    assert set(field.terms) == {"1"}
    np.testing.assert_allclose(field.evaluate(0.05), 0.0, atol=1e-10)


def test_hard_expansion_low_orders(circle_calculus):
    zeroth = hard_expansion_2d(circle_calculus, None, E1, PROBES, order=0)
    np.testing.assert_array_equal(zeroth.evaluate(0.1), 1.0)
    first = hard_expansion_2d(circle_calculus, None, E1, PROBES, order=1)
    r = np.hypot(PROBES[:, 0], PROBES[:, 1])
    np.testing.assert_allclose(first.terms["k"], 1j * np.cos(PROBE_ANGLES) * (r + 1 / r), atol=1e-10)


def test_hard_first_order_term_is_linear_in_direction(circle_calculus):
    alpha = 0.8
    d = np.array([np.cos(alpha), np.sin(alpha)])
    along = hard_expansion_2d(circle_calculus, None, d, PROBES, order=1).terms["k"]
    e1 = hard_expansion_2d(circle_calculus, None, E1, PROBES, order=1).terms["k"]
    e2 = hard_expansion_2d(circle_calculus, None, [0.0, 1.0], PROBES, order=1).terms["k"]
    np.testing.assert_allclose(along, np.cos(alpha) * e1 + np.sin(alpha) * e2, atol=1e-12)


def test_hard_expansion_matches_partial_waves(circle_calculus):
    expansion = hard_expansion_2d(circle_calculus, None, E1, PROBES, order=2)
    np.testing.assert_allclose(expansion.terms["k2lnk"], 0.5, atol=1e-12)
    remainders = [np.max(np.abs(_hard_disc_total_field(k, PROBES) - expansion.evaluate(k))) for k in (0.02, 0.01)]
    assert remainders[0] <= 1e-4
    assert remainders[0] / remainders[1] >= 5.0


def test_hard_expansion_with_medium():
    config = ScattererConfig(
        obstacle=make_curve("circle", (0.5,)),
        bc="hard",
        medium=make_curve("circle", (1.2,)),
        contrast=MediumSpec(0.5),
        R=3.0,
    )
    problem = ForwardProblem(config, Discretization(n_boundary=64, h_volume=0.1))
    calculus = build_calculus(problem.boundary, "hard")
    expansion = hard_expansion_2d(calculus, problem, E1, PROBES, order=2)
    u_v = 0.5 * problem.volume.area
    np.testing.assert_allclose(expansion.terms["k2lnk"], (np.pi * 0.25 - u_v) / (2 * np.pi), atol=1e-12)
    assert np.all(np.isfinite(expansion.terms["k2"]))


def test_soft_expansion_terms(circle_mesh):
    calculus = build_calculus(circle_mesh, "soft")
    expansion = soft_expansion_2d(calculus, None, E1, PROBES)
    assert set(expansion.terms) == {"1", "k", "k2lnk", "k2"}
    r2 = np.sum(PROBES ** 2, axis=1)
    np.testing.assert_allclose(expansion.terms["k"], 1j * (PROBES[:, 0] - PROBES[:, 0] / r2), atol=1e-10)
    consistent = soft_expansion_2d(calculus, None, E1, PROBES, consistent_kernels=True)
    np.testing.assert_allclose(consistent.terms["k"], expansion.terms["k"])
    assert np.all(np.isfinite(consistent.terms["k2"]))


@pytest.mark.parametrize("order", [-1, 3])
def test_expansion_order_range(circle_calculus, order):
    with pytest.raises(OperatorError):
        hard_expansion_2d(circle_calculus, None, E1, PROBES, order=order)


def test_calculus_needs_an_obstacle_condition(circle_mesh):
    with pytest.raises(FormulationError):
        build_calculus(circle_mesh, "none")


def test_asymptotic_field_prefactors():
    points = np.zeros((2, 2))
    field = AsymptoticField(points, {"1": np.ones(2), "k2lnk": np.full(2, 2.0), "k2": np.ones(2)})
    k = 0.1
    np.testing.assert_allclose(field.evaluate(k), 1.0 + 2.0 * k * k * np.log(k) + k * k)
    assert term_prefactor("k", 0.3) == 0.3
    with pytest.raises(OperatorError):
        AsymptoticField(points, {"k3": np.ones(2)})
    with pytest.raises(OperatorError):
        term_prefactor("k3", 0.1)
    with pytest.raises(OperatorError):
        term_prefactor("1/lnk", 0.1)


def test_fit_exponent():
    ks = np.array([0.2, 0.1, 0.05, 0.025])
    assert fit_exponent(ks, 7.0 * ks ** 3) == pytest.approx(3.0)
    assert fit_exponent(ks, ks ** 3 * np.abs(np.log(ks)), log_power=1.0) == pytest.approx(3.0)
    with pytest.raises(OperatorError):
        fit_exponent(ks, np.zeros(4))


def test_fitted_exponents_per_probe():
    ks = np.array([0.2, 0.1, 0.05])
    frame = pd.DataFrame(
        {"k": np.repeat(ks, 2), "probe": np.tile([0, 1], 3), "remainder": np.ravel(np.column_stack([ks ** 2, ks ** 4]))}
    )
    exponents = fitted_exponents(frame)
    assert exponents[0] == pytest.approx(2.0)
    assert exponents[1] == pytest.approx(4.0)


def test_remainder_ladder_frame(circle_mesh):
    config = ScattererConfig(obstacle=make_curve("circle", (1.0,)), bc="hard")
    problem = ForwardProblem(config, Discretization(n_boundary=64))
    frame = remainder_ladder(problem, build_calculus(circle_mesh, "hard"), E1, PROBES[:2], [0.05, 0.025])
    assert list(frame.columns) == ["k", "probe", "remainder"]
    assert len(frame) == 4
    assert frame["remainder"].max() <= 1e-2
    assert not problem._systems


def test_remainder_ladder_needs_an_obstacle(circle_calculus):
    problem = ForwardProblem(ScattererConfig(medium=make_curve("circle", (1.0,)), R=3.0), Discretization(h_volume=0.2))
    with pytest.raises(FormulationError):
        remainder_ladder(problem, circle_calculus, E1, PROBES, [0.1])


@pytest.mark.slow
def test_hard_kite_remainder_decays_like_k3_log_k():
    kite = make_curve("kite")
    problem = ForwardProblem(ScattererConfig(obstacle=kite, bc="hard"), Discretization(n_boundary=128))
    calculus = build_calculus(problem.boundary, "hard")
    probes = (kite.circumradius + 0.8) * unit_vectors(0.31 + 2 * np.pi * np.arange(3) / 3)
    frame = remainder_ladder(problem, calculus, E1, probes, [0.2, 0.1, 0.05, 0.025])
    assert fitted_exponents(frame, log_power=1.0).min() >= 2.7
