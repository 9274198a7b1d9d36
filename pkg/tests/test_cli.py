import json

import pytest

from scatter_workbench.cli import EXIT_CHECK, EXIT_FAILURE, EXIT_OK, EXIT_USAGE, build_parser, main


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "scatterer": {"obstacle": {"kind": "circle", "params": [0.5]}, "R": 3.0},
                "discretization": {"n_boundary": 32},
                "dataset": {"L": 8, "k_min": 1.0, "k_max": 2.0, "M": 2, "directions_deg": [0.0, 90.0]},
                "output": {"dir": str(tmp_path / "out")},
            }
        )
    )
    return str(path)


def test_usage_errors_exit_with_two():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["reconstruct", "--in", "a.json", "--indicator", "music"])
    assert info.value.code == EXIT_USAGE


def test_grid_argument():
    args = build_parser().parse_args(["reconstruct", "--in", "a.json", "--indicator", "liu1", "--grid", "-1 1 -1 1 5"])
    assert args.grid.points.shape == (25, 2)
    with pytest.raises(SystemExit):
        build_parser().parse_args(["reconstruct", "--in", "a.json", "--indicator", "liu1", "--grid", "-1 1 -1"])


def test_bad_configuration(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"grid": {"n": 1}}))
    assert main(["dataset", "--config", str(path)]) == EXIT_USAGE
    assert "/grid/n" in capsys.readouterr().err


def test_thread_count_must_be_positive(config_file):
    assert main(["dataset", "--config", config_file, "--threads", "0"]) == EXIT_USAGE


def test_forward(config_file, tmp_path):
    assert main(["forward", "--config", config_file, "--k", "1.5", "--dir-deg", "45"]) == EXIT_OK
    report = json.loads((tmp_path / "out" / "forward_report.json").read_text())
    assert report["formulation"] == "soft_combined"
    assert report["direction_deg"] == pytest.approx(45.0)
    assert (tmp_path / "out" / "farfield.json").is_file()


def test_dataset_noise_and_reconstruct(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["dataset", "--config", config_file]) == EXIT_OK
    archive = out / "farfield.json"
    assert archive.is_file()
    assert main(["noise", "--config", config_file, "--in", str(archive), "--delta", "0.1", "--seed", "5"]) == EXIT_OK
    noisy = out / "farfield_noisy.json"
    assert json.loads(noisy.read_text())["noise"]["seed"] == 5
    assert main(["noise", "--config", config_file, "--in", str(noisy)]) == EXIT_USAGE
    code = main(
        ["reconstruct", "--config", config_file, "--in", str(noisy), "--indicator", "potthast1", "--grid", "-2 2 -2 2 11"]
    )
    assert code == EXIT_OK
    summary = json.loads((out / "potthast1_summary.json").read_text())
    assert summary["rows"] == 121
    assert (out / "potthast1.pgm").is_file()


def test_reconstruct_with_bad_direction(config_file, tmp_path):
    assert main(["dataset", "--config", config_file]) == EXIT_OK
    archive = str(tmp_path / "out" / "farfield.json")
    assert main(["reconstruct", "--config", config_file, "--in", archive, "--indicator", "liu1", "--direction", "5"]) == EXIT_USAGE


def test_missing_archive_is_a_failure(config_file, tmp_path):
    code = main(["reconstruct", "--config", config_file, "--in", str(tmp_path / "none.json"), "--indicator", "liuN"])
    assert code == EXIT_FAILURE


def test_out_overrides_the_configured_directory(config_file, tmp_path):
    target = tmp_path / "elsewhere"
    assert main(["forward", "--config", config_file, "--k", "1.0", "--out", str(target)]) == EXIT_OK
    assert (target / "farfield.json").is_file()


def test_validate_reports_its_checks(config_file, tmp_path):
    code = main(["validate", "mie", "--config", config_file])
    assert code in (EXIT_OK, EXIT_CHECK)
    report = json.loads((tmp_path / "out" / "validate_mie.json").read_text())
    assert report["passed"] == (code == EXIT_OK)
    assert len(report["checks"]) == 6


def test_band_override_is_part_of_the_archive_hash(config_file, tmp_path):
    hashes = {}
    for band, count in (("obstacle", 10), ("medium", 50)):
        out = tmp_path / band
        assert main(["dataset", "--config", config_file, "--band", band, "--out", str(out)]) == EXIT_OK
        document = json.loads((out / "farfield.json").read_text())
        assert len(document["wavenumbers"]) == count
        hashes[band] = document["provenance"]["config_hash"]
    assert hashes["obstacle"] != hashes["medium"]
    assert main(["dataset", "--config", config_file, "--out", str(tmp_path / "plain")]) == EXIT_OK
    plain = json.loads((tmp_path / "plain" / "farfield.json").read_text())["provenance"]["config_hash"]
    assert plain not in hashes.values()


def test_unwritable_output_is_a_failure(config_file, tmp_path):
    assert main(["dataset", "--config", config_file]) == EXIT_OK
    archive = str(tmp_path / "out" / "farfield.json")
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    code = main(
        ["reconstruct", "--config", config_file, "--in", archive, "--indicator", "liuN", "--out", str(blocker / "sub")]
    )
    assert code == EXIT_FAILURE
