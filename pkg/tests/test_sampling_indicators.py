import numpy as np
import pytest

from scatter_workbench.errors import DomainError, NoiseError
from scatter_workbench.ForwardSolver import FarFieldTensor
from scatter_workbench.Geometry import make_curve, make_grid
from scatter_workbench.SamplingIndicators import (
    NoiseSpec,
    add_noise,
    indicator,
    indicator_liu_multi,
    indicator_liu_single,
    indicator_potthast_multi,
    indicator_potthast_single,
    normalize,
    summarize,
    support_estimate,
    truth_metrics,
)

N_ANGLES = 16
WAVENUMBERS = np.array([1.0, 2.0, 3.0])
DIRECTIONS = np.array([0.0, np.pi / 2])


@pytest.fixture
def point_scatterer():
    """Far field of a point scatterer at the origin: the same value in every entry."""
    angles = 2 * np.pi * np.arange(N_ANGLES) / N_ANGLES
    values = np.ones((N_ANGLES, WAVENUMBERS.size, DIRECTIONS.size), dtype=complex)
    return FarFieldTensor(values, angles, WAVENUMBERS, DIRECTIONS)


@pytest.fixture
def grid():
    return make_grid((-1, 1, -1, 1), 21)


def _peak(field):
    index = int(np.argmax(field.values))
    return field.grid.points[index], field.values[index]


def test_potthast_peaks_at_the_point_scatterer(point_scatterer, grid):
    field = indicator_potthast_single(point_scatterer, 0, grid)
    location, value = _peak(field)
    np.testing.assert_allclose(location, [0.0, 0.0], atol=1e-12)
    assert value == pytest.approx(WAVENUMBERS.size * N_ANGLES ** 2)


def test_liu_peaks_at_the_point_scatterer(point_scatterer, grid):
    field = indicator_liu_single(point_scatterer, 1, grid)
    location, value = _peak(field)
    np.testing.assert_allclose(location, [0.0, 0.0], atol=1e-12)
    assert value == pytest.approx((WAVENUMBERS.size * N_ANGLES) ** 2)


def test_multi_direction_potthast_sums_single_fields(point_scatterer, grid, rng):
    values = rng.standard_normal(point_scatterer.values.shape) + 1j * rng.standard_normal(point_scatterer.values.shape)
    tensor = FarFieldTensor(values, point_scatterer.angles, WAVENUMBERS, DIRECTIONS)
    total = sum(indicator_potthast_single(tensor, n, grid).values for n in range(DIRECTIONS.size))
    np.testing.assert_allclose(indicator_potthast_multi(tensor, grid).values, total, rtol=1e-12)


def test_multi_direction_liu_at_the_origin(point_scatterer, grid):
    _, value = _peak(indicator_liu_multi(point_scatterer, grid))
    assert value == pytest.approx((DIRECTIONS.size * WAVENUMBERS.size * N_ANGLES) ** 2)


def test_threaded_evaluation_matches(point_scatterer):
    fine = make_grid((-2, 2, -2, 2), 61)
    serial = indicator("liuN", point_scatterer, fine)
    threaded = indicator("liuN", point_scatterer, fine, threads=3)
    np.testing.assert_allclose(threaded.values, serial.values, rtol=1e-13)


def test_zero_data_gives_a_degenerate_field(point_scatterer, grid):
    tensor = FarFieldTensor(np.zeros_like(point_scatterer.values), point_scatterer.angles, WAVENUMBERS, DIRECTIONS)
    field = indicator_potthast_multi(tensor, grid)
    assert field.degenerate
    assert normalize(field).max_value == 0.0
    assert not support_estimate(field, 0.5).any()
    assert truth_metrics(field, obstacle=make_curve("circle", (0.5,))) == {}


@pytest.mark.parametrize("kind, direction", [("potthast1", None), ("liu1", 2), ("liu1", -1), ("music", None)])
def test_indicator_arguments(point_scatterer, grid, kind, direction):
    with pytest.raises(DomainError):
        indicator(kind, point_scatterer, grid, direction)


def test_normalized_field(point_scatterer, grid):
    field = normalize(indicator_potthast_single(point_scatterer, 0, grid))
    assert field.normalized
    assert field.values.max() == pytest.approx(1.0)
    assert field.max_value == pytest.approx(WAVENUMBERS.size * N_ANGLES ** 2)
    assert field.as_image().shape == (21, 21)


@pytest.mark.parametrize("level", [0.0, 1.0, -0.2])
def test_support_level_range(point_scatterer, grid, level):
    with pytest.raises(DomainError):
        support_estimate(indicator_potthast_single(point_scatterer, 0, grid), level)


def test_summary_and_truth_metrics(point_scatterer, grid):
    field = indicator_potthast_multi(point_scatterer, grid)
    summary = summarize(field, 0.5)
    assert set(summary) == {
        "indicator", "argmax", "peak", "degenerate", "level", "mask_points", "mask_centroid", "peak_to_background"
    }
    assert not summary["degenerate"]
    np.testing.assert_allclose(summary["mask_centroid"], [0.0, 0.0], atol=1e-12)
    assert summary["peak_to_background"] > 1.0
    metrics = truth_metrics(field, obstacle=make_curve("circle", (0.3,)), medium=make_curve("circle", (0.8,)))
    assert metrics["argmax_error"] == pytest.approx(0.0, abs=1e-12)
    assert 0.0 < metrics["coverage"] <= 1.0
    assert "medium_contrast" in metrics


def test_noise_of_zero_level_copies_the_data(point_scatterer):
    noisy = add_noise(point_scatterer, NoiseSpec(0.0, 3))
    np.testing.assert_array_equal(noisy.values, point_scatterer.values)
    assert noisy.values is not point_scatterer.values
    assert noisy.noise == {"delta": 0.0, "seed": 3, "model": "relative-unit-phase"}


def test_noise_has_exact_relative_modulus(point_scatterer, rng):
    values = rng.standard_normal(point_scatterer.values.shape) + 1j * rng.standard_normal(point_scatterer.values.shape)
    tensor = FarFieldTensor(values, point_scatterer.angles, WAVENUMBERS, DIRECTIONS)
    noisy = add_noise(tensor, NoiseSpec(0.1, 7))
    np.testing.assert_allclose(np.abs(noisy.values / values - 1.0), 0.1, rtol=1e-12)
    assert point_scatterer.noise is None


def test_noise_is_reproducible(point_scatterer):
    first = add_noise(point_scatterer, NoiseSpec(0.2, 11))
    second = add_noise(point_scatterer, NoiseSpec(0.2, 11))
    other = add_noise(point_scatterer, NoiseSpec(0.2, 12))
    np.testing.assert_array_equal(first.values, second.values)
    assert not np.array_equal(first.values, other.values)


def test_noise_is_added_once(point_scatterer):
    noisy = add_noise(point_scatterer, NoiseSpec(0.1, 1))
    with pytest.raises(NoiseError):
        add_noise(noisy, NoiseSpec(0.1, 2))


@pytest.mark.parametrize("delta, seed", [(-0.1, 1), (1.0, 1), (0.1, -5)])
def test_noise_spec_validation(delta, seed):
    with pytest.raises(NoiseError):
        NoiseSpec(delta, seed)


BORN_CENTER = np.array([0.3, -0.4])
FOUR_DIRECTIONS = np.radians([0.0, 90.0, 270.0, 180.0])


def _born_tensor(center, directions=FOUR_DIRECTIONS):
    """Born far field of a point scatterer at ``center``: e^{i k d.z0} e^{-i k xhat.z0}."""
    angles = 2 * np.pi * np.arange(N_ANGLES) / N_ANGLES
    xhat = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    d = np.stack([np.cos(directions), np.sin(directions)], axis=1)
    phase = (d @ center)[None, None, :] - (xhat @ center)[:, None, None]
    values = np.exp(1j * WAVENUMBERS[None, :, None] * phase)
    return FarFieldTensor(values, angles, WAVENUMBERS, directions)


def _all_fields(tensor, grid):
    return {
        "potthast1": indicator_potthast_single(tensor, 0, grid),
        "liu1": indicator_liu_single(tensor, 0, grid),
        "potthastN": indicator_potthast_multi(tensor, grid),
        "liuN": indicator_liu_multi(tensor, grid),
    }


def test_born_point_scatterer_off_the_origin(grid):
    fields = _all_fields(_born_tensor(BORN_CENTER), grid)
    peaks = {
        "potthast1": WAVENUMBERS.size * N_ANGLES ** 2,
        "liu1": (WAVENUMBERS.size * N_ANGLES) ** 2,
        "potthastN": FOUR_DIRECTIONS.size * WAVENUMBERS.size * N_ANGLES ** 2,
        "liuN": (FOUR_DIRECTIONS.size * WAVENUMBERS.size * N_ANGLES) ** 2,
    }
    for kind, field in fields.items():
        location, value = _peak(field)
        np.testing.assert_allclose(location, BORN_CENTER, atol=1e-12, err_msg=kind)
        assert value == pytest.approx(peaks[kind]), kind


def test_fields_move_with_the_scatterer(rng):
    shift = np.array([0.5, -0.3])
    base = make_grid((-1, 1, -1, 1), 11)
    moved = make_grid((-0.5, 1.5, -1.3, 0.7), 11)
    np.testing.assert_allclose(moved.points, base.points + shift, atol=1e-12)
    original = _born_tensor(np.array([0.1, 0.2]))
    values = original.values * (rng.standard_normal(original.values.shape) + 1j * rng.standard_normal(original.values.shape))
    tensor = FarFieldTensor(values, original.angles, WAVENUMBERS, FOUR_DIRECTIONS)
    xhat = tensor.observation_vectors
    d = tensor.direction_vectors
    translation = np.exp(-1j * WAVENUMBERS[None, :, None] * ((xhat @ shift)[:, None, None] - (d @ shift)[None, None, :]))
    translated = FarFieldTensor(values * translation, original.angles, WAVENUMBERS, FOUR_DIRECTIONS)
    before = _all_fields(tensor, base)
    after = _all_fields(translated, moved)
    for kind in before:
        scale = before[kind].values.max()
        np.testing.assert_allclose(after[kind].values, before[kind].values, rtol=1e-9, atol=1e-12 * scale, err_msg=kind)


def test_argmax_ignores_a_global_factor(grid):
    tensor = _born_tensor(BORN_CENTER)
    factor = 3.7e-3 * np.exp(0.4j)
    scaled = FarFieldTensor(factor * tensor.values, tensor.angles, WAVENUMBERS, FOUR_DIRECTIONS)
    plain, rescaled = _all_fields(tensor, grid), _all_fields(scaled, grid)
    for kind in plain:
        assert np.argmax(rescaled[kind].values) == np.argmax(plain[kind].values), kind
        expected = abs(factor) ** 2 * plain[kind].values
        np.testing.assert_allclose(rescaled[kind].values, expected, rtol=1e-10, atol=1e-12 * expected.max())


def test_multi_direction_liu_exceeds_the_single_direction_sum(grid):
    tensor = _born_tensor(BORN_CENTER)
    combined = indicator_liu_multi(tensor, grid).values.max()
    separate = sum(indicator_liu_single(tensor, n, grid).values.max() for n in range(FOUR_DIRECTIONS.size))
    assert combined > separate


def test_argmax_is_stable_under_ten_percent_noise(grid):
    tensor = _born_tensor(BORN_CENTER)
    noisy = add_noise(tensor, NoiseSpec(0.1, 42))
    step = grid.points[1, 0] - grid.points[0, 0]
    clean, perturbed = _all_fields(tensor, grid), _all_fields(noisy, grid)
    for kind in clean:
        moved = np.abs(_peak(perturbed[kind])[0] - _peak(clean[kind])[0])
        assert np.all(moved <= 2 * step + 1e-12), kind
