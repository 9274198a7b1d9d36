import numpy as np
import pytest

from scatter_workbench.errors import WorkbenchError
from scatter_workbench.ForwardSolver import ScattererConfig
from scatter_workbench.Geometry import make_curve
from scatter_workbench.Settings import parse_config
from scatter_workbench.Validation import (
    SuiteReport,
    flux_suite,
    ladder_probes,
    lowk_suite,
    mie_suite,
    operators_suite,
    reconstruction_suite,
    run_suite,
)


def test_suite_report_bookkeeping():
    report = SuiteReport("demo")
    assert report.at_most("small", 1e-9, 1e-8).passed
    assert report.at_least("exponent", 2.9, 2.7).passed
    assert report.passed
    assert not report.at_most("large", 1e-3, 1e-8).passed
    assert not report.passed
    report.failed("crash", WorkbenchError("boom"))
    document = report.to_dict()
    assert document["suite"] == "demo"
    assert [check["name"] for check in document["checks"]] == ["small", "exponent", "large", "crash"]
    assert document["checks"][-1]["detail"] == "WorkbenchError: boom"
    assert np.isnan(document["checks"][-1]["measured"])


def test_mie_suite_on_a_coarse_mesh():
    report = mie_suite(n_boundary=64, wavenumbers=(1.0,), n_angles=16)
    assert len(report.checks) == 2
    assert report.passed


def test_operators_suite():
    report = operators_suite(n_boundary=128, n_probes=20)
    assert len(report.checks) == 18
    assert report.passed, [check for check in report.checks if not check.passed]


def test_flux_suite_needs_a_medium():
    config = parse_config({"scatterer": {"obstacle": {"kind": "kite"}}})
    report = flux_suite(config)
    assert not report.passed
    assert report.checks[0].name == "flux"


def test_lowk_suite_needs_an_obstacle():
    config = parse_config({"scatterer": {"medium": {"kind": "circle"}}})
    assert not lowk_suite(config).passed


def test_ladder_probes_stay_in_the_ball():
    kite = make_curve("kite")
    probes = ladder_probes(ScattererConfig(obstacle=kite, R=6.0))
    np.testing.assert_allclose(np.hypot(probes[:, 0], probes[:, 1]), kite.circumradius + 0.8)
    with pytest.raises(WorkbenchError):
        ladder_probes(ScattererConfig(obstacle=make_curve("circle", (1.0,)), R=1.5))


def test_unknown_suite():
    with pytest.raises(WorkbenchError):
        run_suite("energy")


@pytest.mark.slow
def test_benchmark_reciprocity_and_flux():
    assert run_suite("reciprocity").passed
    assert run_suite("flux").passed


@pytest.mark.slow
def test_benchmark_low_frequency_ladders():
    assert run_suite("lowk").passed


def test_reconstruction_suite_needs_an_obstacle_and_a_medium():
    report = reconstruction_suite(parse_config({"scatterer": {"obstacle": {"kind": "kite"}}}))
    assert not report.passed
    assert report.checks[0].name == "reconstruction"


@pytest.mark.slow
def test_benchmark_reconstruction():
    config = parse_config({"discretization": {"n_boundary": 128, "h_volume": 0.1}})
    report = reconstruction_suite(config)
    checks = {check.name: check for check in report.checks}
    assert checks["potthast1: argmax distance to the obstacle centroid"].measured <= 0.5
    assert checks["liu1: argmax distance to the obstacle centroid"].measured <= 0.5
    assert checks["liuN: obstacle coverage"].measured >= 0.5
    assert checks["liuN: mask centroid distance"].measured <= 0.5
    assert checks["liu1: medium contrast"].measured >= 2.0
    assert checks["potthast1: medium contrast"].measured >= 2.0
    assert report.passed
