import json
import math

import numpy as np
import pandas as pd
import pytest

from app.config.storage import get_meta_path, get_report_path
from app.errors import ConfigParseError, ReportIOError, ZeroProbabilityBranch
from app.models.state import DensityOperator, PureState
from app.services.composite import lift_observable, product_refinement
from app.services.experiments import ExperimentResult
from app.services.measurement import von_neumann_measure
from app.services.spectral import spectral_decompose
from app.utils.io import atomic_write_text
from app.utils.serialization import (
    dumps,
    load_fixture,
    operator_from_dict,
    operator_to_dict,
    record_to_dict,
    state_from_dict,
    state_to_dict,
    to_jsonable,
)
from output_manager import SCHEMA_VERSION, OutputManager, emit_report, render_csv


def _result(table=None, payload=None):
    return ExperimentResult(
        experiment="window-sweep",
        seed=5,
        payload=payload or {"rows": []},
        table=table if table is not None else pd.DataFrame(columns=["window_s", "S"]),
        summary={"max_abs_S": math.nan},
    )


def test_non_finite_values_are_json_safe():
    text = dumps({"nan": math.nan, "inf": math.inf, "ninf": -math.inf, "n": np.int64(3)})
    data = json.loads(text)
    assert data == {"inf": "inf", "n": 3, "nan": None, "ninf": "-inf"}


def test_complex_values_and_arrays():
    data = to_jsonable({"c": 0.6j, "v": np.array([1 + 1j, 2])})
    assert data["c"] == {"re": 0.0, "im": 0.6}
    assert data["v"] == {"re": [1.0, 2.0], "im": [1.0, 0.0]}


def test_state_and_operator_codecs(singlet, sigma_y):
    pure = state_from_dict(json.loads(dumps(state_to_dict(singlet))))
    np.testing.assert_allclose(pure.vector, singlet.vector, atol=1e-15)

    rho = DensityOperator([[0.75, 0.25j], [-0.25j, 0.25]])
    mixed = state_from_dict(state_to_dict(rho))
    assert isinstance(mixed, DensityOperator)
    np.testing.assert_allclose(mixed.matrix, rho.matrix, atol=1e-15)

    op = operator_from_dict(operator_to_dict(sigma_y))
    assert op.allclose(sigma_y, atol=1e-15)


def test_undetermined_record_names_its_refinement(three_term_state, qubit_pair, sigma_z):
    obs = spectral_decompose(lift_observable(sigma_z, 1, qubit_pair))
    family, _ = product_refinement(sigma_z, sigma_z)
    data = record_to_dict(von_neumann_measure(three_term_state, obs, family, 1))
    assert data["determined"] is False
    assert data["refinement_basis_id"] == family.basis_id
    assert data["post_state"]["kind"] == "undetermined"
    assert data["post_state"]["basis_id"] == family.basis_id
    assert data["postulate"] == "von_neumann"


def test_load_fixture_errors(tmp_path):
    with pytest.raises(ReportIOError):
        load_fixture(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigParseError):
        load_fixture(str(broken))
    with pytest.raises(ConfigParseError):
        state_from_dict({"dim": 2})
    with pytest.raises(ConfigParseError):
        operator_from_dict({"dim": 2, "re": [[0, 1], [1]]})
    with pytest.raises(ConfigParseError):
        state_from_dict({"dim": 2, "re": ["up", 0]})


def test_empty_table_gives_header_only_csv():
    assert render_csv(_result()) == "window_s,S\n"


def test_emit_csv_with_sidecar(tmp_path):
    table = pd.DataFrame([{"window_s": math.inf, "S": -2.5}], columns=["window_s", "S"])
    path = str(tmp_path / "sweep.csv")
    manager = OutputManager(str(tmp_path))
    emit_report(_result(table), "csv", path, manager)
    assert manager.written == [path, get_meta_path(path)]

    meta = json.loads(open(get_meta_path(path), encoding="utf-8").read())
    assert meta["schema_version"] == SCHEMA_VERSION
    assert meta["columns"] == ["window_s", "S"]
    assert meta["summary"]["max_abs_S"] is None
    assert open(path, encoding="utf-8").read() == "window_s,S\ninf,-2.5\n"


def test_emit_json(tmp_path):
    path = str(tmp_path / "r.json")
    emit_report(_result(payload={"value": 1.5}), "json", path)
    report = json.loads(open(path, encoding="utf-8").read())
    assert report["payload"] == {"value": 1.5}
    assert report["experiment"] == "window-sweep"
    assert report["seed"] == 5
    assert "generated_at" in report


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ReportIOError):
        emit_report(_result(), "xml", str(tmp_path / "r.xml"))


def test_default_report_layout(tmp_path):
    assert get_report_path("chsh", "csv", str(tmp_path)) == str(tmp_path / "chsh" / "correlations.csv")
    with pytest.raises(ValueError):
        get_report_path("unknown", "json")


def test_atomic_write_failure_is_an_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ReportIOError):
        atomic_write_text(str(blocker / "report.json"), "{}")


def test_error_line_format():
    error = ZeroProbabilityBranch('branch "1" has\nprobability 0')
    assert error.as_line() == (
        "error=ZeroProbabilityBranch module=measurement exit=3 "
        "message=\"branch '1' has probability 0\""
    )
    assert isinstance(error, ValueError)


def test_pure_state_rejects_unnormalized_vector():
    with pytest.raises(ValueError):
        PureState([1.0, 1.0])
