"""End-to-end runs of the command-line interface.

Every invocation goes through main() in process; outputs land in tmp_path.
Exit codes: 0 success, 1 failed validation, 2 config/usage problems,
3 numerical failures surfaced from the library.
"""
import csv
import hashlib
import json

import numpy as np
import pytest

from aptfilter.cli import main
from aptfilter.tomography import AmbiguousPhaseError

SMALL_LATTICE = {"gamma": 0.25, "bandwidth": 4.0, "chain_length": 10, "k_levels": 60}
MEASURED_DATASETS = [
    {"config": "coupler", "probs": [0.2578, 0.2633, 0.4789]},
    {"config": "coupler_after_quarter_phase", "probs": [0.6737, 0.0816, 0.2447]},
]


def write_config(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_design_writes_table_and_manifest(tmp_path):
    cfg = write_config(tmp_path, {"lattice": {}})
    out = tmp_path / "out"
    assert main(["design", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "design.csv")
    assert rows[0] == ["n", "J_n (cm^-1)", "spacing_n (um)"]
    assert len(rows) == 51
    assert float(rows[1][1]) == pytest.approx(0.798283, abs=1e-4)
    assert float(rows[1][2]) == pytest.approx(20.01, abs=0.05)

    manifest = json.loads((out / "manifest.json").read_text())
    entry = next(o for o in manifest["outputs"] if o["path"] == "design.csv")
    digest = hashlib.sha256((out / "design.csv").read_bytes()).hexdigest()
    assert entry["sha256"] == digest
    assert entry["bytes"] == (out / "design.csv").stat().st_size


def test_design_requires_lattice_section(tmp_path, capsys):
    assert main(["design", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "lattice" in err
    assert "empty object" in err


def test_propagate_small_run(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "lattice": SMALL_LATTICE,
            "input": {"photon_number": 1, "occupation": [1, 0]},
            "run": {"model": "full", "z_start": 0.0, "z_stop": 2.0, "z_steps": 5},
        },
    )
    out = tmp_path / "out"
    assert main(["propagate", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "propagate.csv")
    assert len(rows) == 6  # header + z_steps
    assert rows[0][0] == "z"
    # post-selection success starts at 1
    first = dict(zip(rows[0], rows[1]))
    assert float(first["z"]) == 0.0


def test_lindblad_small_run(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "lattice": SMALL_LATTICE,
            "input": {"photon_number": 2, "preset": "attractor"},
            "run": {"model": "lindblad", "z_start": 0.0, "z_stop": 1.0, "z_steps": 3},
        },
    )
    out = tmp_path / "out"
    assert main(["lindblad", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "lindblad.csv").exists()


def test_tomography_fit_report(tmp_path):
    cfg = write_config(
        tmp_path,
        {"tomography": {"datasets": MEASURED_DATASETS, "landscape_points": 30}},
    )
    out = tmp_path / "out"
    assert main(["tomography", "fit", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "fit_report.json").read_text())
    for key in ("phi1", "phi2", "mse", "unique", "n_basins", "basins", "max_abs_residual"):
        assert key in report
    assert report["n_datasets"] == 2
    assert report["residuals_within_0.06"] is True
    free = report["unconstrained"]
    assert free["phi1"] == pytest.approx(0.0586, abs=0.02)
    assert free["phi2"] == pytest.approx(3.1709, abs=0.02)
    assert free["unique"] is True

    landscape = read_csv(out / "mse_landscape.csv")
    assert landscape[0] == ["phi1", "phi2", "mse"]
    assert len(landscape) == 1 + 30 * 30
    assert (out / "reconstructed_state.csv").exists()


def test_tomography_fit_from_csv_argument(tmp_path):
    data = tmp_path / "data.csv"
    with open(data, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "P20", "P02", "P11"])
        for ds in MEASURED_DATASETS:
            writer.writerow([ds["config"], *ds["probs"]])
    out = tmp_path / "out"
    assert main(["tomography", "fit", str(data), "--out", str(out)]) == 0
    report = json.loads((out / "fit_report.json").read_text())
    assert report["n_datasets"] == 2


def test_tomography_needs_fit_subcommand(tmp_path, capsys):
    assert main(["tomography"]) == 2
    assert "tomography fit" in capsys.readouterr().err


def test_tomography_without_data_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"tomography": {}})
    assert main(["tomography", "fit", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "no datasets" in capsys.readouterr().err


def test_ensemble_is_reproducible_and_seed_overrides(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "lattice": SMALL_LATTICE,
            "input": {"photon_number": 1, "occupation": [1, 0]},
            "run": {"z_start": 0.0, "z_stop": 2.0, "z_steps": 4},
            "ensemble": {"n_trials": 3, "seed": 1, "relative_amplitude": 0.05},
        },
    )
    out_a, out_b, out_c = (tmp_path / n for n in ("a", "b", "c"))
    assert main(["ensemble", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["ensemble", "--config", cfg, "--out", str(out_b)]) == 0
    assert (out_a / "ensemble.csv").read_bytes() == (out_b / "ensemble.csv").read_bytes()
    assert main(["ensemble", "--config", cfg, "--out", str(out_c), "--seed", "2"]) == 0
    assert (out_a / "ensemble.csv").read_bytes() != (out_c / "ensemble.csv").read_bytes()
    manifest = json.loads((out_c / "manifest.json").read_text())
    assert manifest["config"]["ensemble"]["seed"] == 2


def test_validate_accepts_good_config(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"lattice": SMALL_LATTICE, "input": {}, "run": {"z_stop": 2.0}},
    )
    assert main(["validate", "--config", cfg]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_warns_about_revival_horizon(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"lattice": SMALL_LATTICE, "input": {}, "run": {"z_stop": 100.0}},
    )
    assert main(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "warning" in out
    assert "reviv" in out


def test_validate_rejects_bad_physics(tmp_path, capsys):
    cfg = write_config(tmp_path, {"lattice": {"gamma": -1.0}})
    assert main(["validate", "--config", cfg]) == 1
    assert "gamma" in capsys.readouterr().out


def test_validate_requires_config(capsys):
    assert main(["validate"]) == 2
    assert "--config" in capsys.readouterr().err


def test_invalid_json_is_config_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["design", "--config", str(path)]) == 2
    assert "JSON" in capsys.readouterr().err


def test_schema_violation_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"lattice": {"gamma": "fast"}})
    assert main(["design", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "config.lattice.gamma" in capsys.readouterr().err


def test_no_command_prints_usage(capsys):
    assert main([]) == 2
    assert "subcommand" in capsys.readouterr().err


def test_figure_list(capsys):
    assert main(["--figure", "list"]) == 0
    out = capsys.readouterr().out
    assert "figS7" in out
    assert "fig2b" in out


def test_unknown_figure_is_config_error(capsys):
    assert main(["--figure", "figZ9"]) == 2
    err = capsys.readouterr().err
    assert "unknown figure" in err


def test_figure_with_wrong_subcommand(capsys):
    assert main(["ensemble", "--figure", "figS7"]) == 2
    assert "tomography" in capsys.readouterr().err


def test_figure_s7_runs_on_bundled_data(tmp_path):
    out = tmp_path / "fig"
    assert main(["--figure", "figS7", "--out", str(out)]) == 0
    report = json.loads((out / "fit_report.json").read_text())
    assert report["unconstrained"]["unique"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["figure"] == "figS7"


def test_numerical_errors_map_to_exit_three(tmp_path, monkeypatch, capsys):
    def explode(*args, **kwargs):
        raise AmbiguousPhaseError("no single basin")

    monkeypatch.setattr("aptfilter.cli.fit_phases", explode)
    cfg = write_config(tmp_path, {"tomography": {"datasets": MEASURED_DATASETS}})
    assert main(["tomography", "fit", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "AmbiguousPhaseError" in capsys.readouterr().err
