import json
import math
import os

import pandas as pd
import pytest
import yaml

import main
from app.services.coincidence import SWEEP_COLUMNS
from app.services.experiments import CHSH_COLUMNS


@pytest.fixture(autouse=True)
def reset_loggers():
    yield
    import logging

    for name in main.LOGGER_NAMES:
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()


def write_config(tmp_path, data, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def error_lines(captured):
    return [line for line in captured.err.splitlines() if line.startswith("error=")]


def test_epr_demo_report(output_dir, capsys):
    assert main.main(["epr-demo", "--seed", "1"]) == 0
    path = output_dir / "epr" / "epr_demo.json"
    assert capsys.readouterr().out.strip() == str(path)

    report = json.loads(path.read_text(encoding="utf-8"))
    assert report["schema_version"] == "1.0"
    assert report["experiment"] == "epr-demo"
    assert report["seed"] == 1
    branches = report["payload"]["branches"]
    assert len(branches) == 2
    for branch in branches:
        assert branch["luders"]["post_state"] == "product, sharp"
        assert branch["von_neumann"]["post_state"] == "undetermined"
        assert branch["von_neumann"]["state"]["kind"] == "undetermined"
        assert branch["probability"] == pytest.approx(0.5)


def test_epr_demo_with_observed_refinement_outcome(tmp_path):
    config = write_config(
        tmp_path,
        {"experiment": "epr-demo", "params": {"c1": 0.6, "c2": 0.8, "outcome_index": 1, "refinement_outcome": 0}},
    )
    out = tmp_path / "epr.json"
    assert main.main(["epr-demo", "--config", config, "--out", str(out)]) == 0
    branch = json.loads(out.read_text())["payload"]["branches"][0]
    assert branch["von_neumann"]["post_state"] == "determined, sharp"
    assert branch["probability"] == pytest.approx(0.36)


def test_chsh_csv_and_sidecar(tmp_path):
    out = tmp_path / "chsh.csv"
    assert main.main(["chsh", "--out", str(out), "--seed", "3"]) == 0
    table = pd.read_csv(out)
    assert list(table.columns) == CHSH_COLUMNS
    assert len(table) == 4

    meta = json.loads((tmp_path / "chsh.csv.meta.json").read_text())
    assert meta["columns"] == CHSH_COLUMNS
    assert meta["summary"]["abs_S"] == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    assert abs(meta["summary"]["S_sampled"] - meta["summary"]["S"]) <= 3 * meta["summary"]["stderr_S"]


def test_chsh_is_reproducible(tmp_path):
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert main.main(["chsh", "--seed", "8", "--out", str(first)]) == 0
    assert main.main(["chsh", "--seed", "8", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_chsh_as_json(tmp_path):
    out = tmp_path / "chsh.json"
    assert main.main(["chsh", "--format", "json", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())["payload"]
    assert payload["abs_S"] == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    assert not (tmp_path / "chsh.json.meta.json").exists()


def test_postulate_compare_report(tmp_path):
    out = tmp_path / "compare.json"
    assert main.main(["postulate-compare", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())["payload"]
    plus = next(b for b in payload["branches"] if b["luders"]["outcome"] == pytest.approx(1.0))
    assert plus["luders"]["determined"] is True
    assert plus["von_neumann"]["determined"] is False
    assert plus["von_neumann"]["refinement_basis_id"] == payload["refinement"]["id"]
    assert plus["refinement_difference"] >= 0.0
    assert payload["rotated_refinement"]["id"] != payload["refinement"]["id"]


def test_condprob_report(tmp_path):
    out = tmp_path / "condprob.json"
    assert main.main(["condprob", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())["payload"]
    assert payload["max_asymmetry"] == pytest.approx(0.0, abs=1e-9)
    assert payload["max_state_dependence"] == pytest.approx(0.0, abs=1e-9)
    assert len(payload["tables"]["state"]) == 4


def test_window_sweep_with_click_export_and_reload(tmp_path):
    config = write_config(
        tmp_path,
        {
            "experiment": "window-sweep",
            "seed": 4,
            "params": {
                "n_pairs": 2000,
                "windows": ["inf", 1.0e-7],
                "export_clicks_dir": str(tmp_path / "clicks"),
            },
        },
    )
    out = tmp_path / "sweep.csv"
    assert main.main(["window-sweep", "--config", config, "--out", str(out)]) == 0
    simulated = pd.read_csv(out)
    assert list(simulated.columns) == SWEEP_COLUMNS
    assert simulated["window_s"].iloc[0] == math.inf
    clicks = tmp_path / "clicks" / "clicks.csv"
    assert clicks.exists()

    replay = write_config(
        tmp_path,
        {"experiment": "window-sweep", "params": {"windows": ["inf", 1.0e-7], "clicks_path": str(clicks)}},
        name="replay.yaml",
    )
    replay_out = tmp_path / "replay.csv"
    assert main.main(["window-sweep", "--config", replay, "--out", str(replay_out)]) == 0
    replayed = pd.read_csv(replay_out)
    assert replayed["S"].tolist() == simulated["S"].tolist()
    assert replayed["matched_fraction"].tolist() == simulated["matched_fraction"].tolist()


def test_negative_window_is_a_config_error(tmp_path, capsys):
    config = write_config(tmp_path, {"experiment": "window-sweep", "params": {"windows": [-1.0e-9]}})
    out = tmp_path / "sweep.csv"
    assert main.main(["window-sweep", "--config", config, "--out", str(out)]) == 2
    assert not out.exists()
    lines = error_lines(capsys.readouterr())
    assert len(lines) == 1
    assert lines[0].startswith("error=ValidationError module=cli exit=2 message=")


def test_unknown_config_key_rejected(tmp_path, capsys):
    config = write_config(tmp_path, {"experiment": "chsh", "params": {"n_sample": 10}})
    assert main.main(["chsh", "--config", config]) == 2
    assert "n_sample" in error_lines(capsys.readouterr())[0]


def test_malformed_yaml(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("experiment: [chsh\n", encoding="utf-8")
    assert main.main(["chsh", "--config", str(path)]) == 2
    assert error_lines(capsys.readouterr())[0].startswith("error=ConfigParseError")


def test_config_for_another_experiment(tmp_path):
    config = write_config(tmp_path, {"experiment": "chsh"})
    assert main.main(["epr-demo", "--config", config]) == 2


def test_unnormalized_coefficients(tmp_path):
    config = write_config(tmp_path, {"experiment": "epr-demo", "params": {"c1": 0.6, "c2": 0.6}})
    assert main.main(["epr-demo", "--config", config]) == 2


def test_numerical_error_exit_code(tmp_path, capsys):
    config = write_config(
        tmp_path,
        {"experiment": "postulate-compare", "params": {"operator": {"dim": 2, "re": [[0, 1], [0, 0]]}}},
    )
    out = tmp_path / "compare.json"
    assert main.main(["postulate-compare", "--config", config, "--out", str(out)]) == 3
    assert not out.exists()
    line = error_lines(capsys.readouterr())[0]
    assert line.startswith("error=NotHermitian module=spectral exit=3")


def test_missing_fixture_is_an_io_error(tmp_path, capsys):
    config = write_config(
        tmp_path, {"experiment": "chsh", "params": {"state": str(tmp_path / "missing.json")}}
    )
    assert main.main(["chsh", "--config", config, "--out", str(tmp_path / "c.csv")]) == 4
    assert error_lines(capsys.readouterr())[0].startswith("error=IoError module=reports exit=4")


def test_empty_click_table_is_an_io_error(tmp_path, capsys):
    clicks = tmp_path / "clicks.csv"
    clicks.write_text("", encoding="utf-8")
    config = write_config(tmp_path, {"experiment": "window-sweep", "params": {"clicks_path": str(clicks)}})
    out = tmp_path / "sweep.csv"
    assert main.main(["window-sweep", "--config", config, "--out", str(out)]) == 4
    assert not out.exists()
    lines = error_lines(capsys.readouterr())
    assert len(lines) == 1
    assert lines[0].startswith("error=IoError module=reports exit=4")


def test_non_numeric_click_times_are_rejected(tmp_path, capsys):
    clicks = tmp_path / "clicks.csv"
    clicks.write_text(
        "side,pair_id,setting_deg,outcome,time_tag_s\nA,0,0.0,1,soon\nB,0,22.5,-1,1e-5\n", encoding="utf-8"
    )
    config = write_config(tmp_path, {"experiment": "window-sweep", "params": {"clicks_path": str(clicks)}})
    assert main.main(["window-sweep", "--config", config, "--out", str(tmp_path / "sweep.csv")]) == 3
    lines = error_lines(capsys.readouterr())
    assert len(lines) == 1
    assert lines[0].startswith("error=InvalidModelParams module=coincidence exit=3")


def test_ragged_operator_fixture_is_a_parse_error(tmp_path, capsys):
    config = write_config(
        tmp_path,
        {"experiment": "postulate-compare", "params": {"operator": {"dim": 2, "re": [[0, 1], [1]]}}},
    )
    out = tmp_path / "compare.json"
    assert main.main(["postulate-compare", "--config", config, "--out", str(out)]) == 2
    assert not out.exists()
    lines = error_lines(capsys.readouterr())
    assert len(lines) == 1
    assert lines[0].startswith("error=ConfigParseError module=cli exit=2")


def test_fixture_file_state(tmp_path):
    fixture = tmp_path / "phi_plus.json"
    fixture.write_text(json.dumps({"dim": 4, "re": [math.sqrt(0.5), 0, 0, math.sqrt(0.5)]}))
    config = write_config(tmp_path, {"experiment": "chsh", "params": {"state": str(fixture), "n_samples": 100}})
    out = tmp_path / "phi.csv"
    assert main.main(["chsh", "--config", config, "--out", str(out)]) == 0
    table = pd.read_csv(out)
    # Φ⁺ with real spin observables gives E = cos(θ_a − θ_b)
    assert table["E_quantum"].iloc[0] == pytest.approx(math.cos(math.pi / 4))


def test_bad_log_level(tmp_path):
    assert main.main(["chsh", "--log-level", "LOUD", "--out", str(tmp_path / "c.csv")]) == 2


def test_log_file(tmp_path):
    log_file = tmp_path / "logs" / "qmeas.log"
    out = tmp_path / "c.csv"
    assert main.main(["chsh", "--log-file", str(log_file), "--out", str(out)]) == 0
    assert "CHSH S=" in log_file.read_text()


def test_flags_before_subcommand(tmp_path):
    out = tmp_path / "c.csv"
    assert main.main(["--seed", "2", "--out", str(out), "chsh"]) == 0
    assert out.exists()


def test_run_experiment_reports_timing(tmp_path):
    from app.config.experiment import build_config
    from output_manager import OutputManager
    from timing_metrics import TimingMetrics

    config = build_config("condprob", overrides={"output_path": str(tmp_path / "cp.json")})
    timing = TimingMetrics("condprob")
    run = main.run_experiment(config, OutputManager(str(tmp_path)), timing)
    assert run.exit_code == 0
    assert run.report_paths == [str(tmp_path / "cp.json")]
    metrics = timing.get_metrics()
    assert set(metrics["phase_times"]) == {"compute", "write"}
    assert metrics["total_duration"] is not None


def test_default_configs_parse():
    from app.config.experiment import build_config

    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    for name in sorted(os.listdir(root)):
        config = build_config(config_path=os.path.join(root, name))
        assert config.seed >= 0
