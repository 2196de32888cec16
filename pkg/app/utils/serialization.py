"""JSON codecs for operators, states and measurement records.

Operators and states use ``{"dim": n, "re": [...], "im": [...]}``; vectors are
flat lists and matrices nested row lists.
"""

import json
import math
from dataclasses import fields, is_dataclass
from typing import Any, Dict, Mapping, Union

import numpy as np

from app.errors import ConfigParseError, DimensionMismatch, ReportIOError
from app.models.operators import HermitianOperator
from app.models.state import DensityOperator, MeasurementRecord, PureState, QuantumState, Undetermined


def _split(array: np.ndarray) -> Dict[str, Any]:
    return {"re": np.real(array).tolist(), "im": np.imag(array).tolist()}


def _join(data: Mapping[str, Any]) -> np.ndarray:
    if "re" not in data:
        raise ConfigParseError("Matrix fixture needs a 're' field")
    try:
        re = np.array(data["re"], dtype=float)
        im = np.array(data["im"], dtype=float) if data.get("im") is not None else np.zeros_like(re)
    except (TypeError, ValueError) as e:
        raise ConfigParseError(f"Matrix fixture entries must be a rectangular array of numbers: {e}") from e
    if re.shape != im.shape:
        raise DimensionMismatch(f"'re' shape {re.shape} and 'im' shape {im.shape} differ")
    array = re + 1j * im
    dim = data.get("dim")
    if dim is not None and array.shape[0] != dim:
        raise DimensionMismatch(f"Fixture declares dim {dim} but holds {array.shape[0]} rows")
    return array


def operator_to_dict(op: Union[HermitianOperator, np.ndarray]) -> Dict[str, Any]:
    entries = op.entries if isinstance(op, HermitianOperator) else np.asarray(op)
    return {"dim": int(entries.shape[0]), **_split(entries)}


def operator_from_dict(data: Mapping[str, Any]) -> HermitianOperator:
    entries = _join(data)
    if entries.ndim != 2:
        raise DimensionMismatch(f"Operator fixture must be a matrix, got shape {entries.shape}")
    return HermitianOperator(entries)


def state_to_dict(state: QuantumState) -> Dict[str, Any]:
    if isinstance(state, PureState):
        return {"kind": "pure", "dim": state.dim, **_split(state.vector)}
    return {"kind": "density", "dim": state.dim, **_split(state.density_matrix())}


def state_from_dict(data: Mapping[str, Any]) -> QuantumState:
    """Flat ``re`` gives a PureState, nested ``re`` a DensityOperator."""
    array = _join(data)
    if array.ndim == 1:
        return PureState(array)
    return DensityOperator(array)


def load_fixture(ref: Any) -> Dict[str, Any]:
    """Resolve an inline fixture, a pydantic fixture model or a path to a JSON fixture file."""
    if isinstance(ref, str):
        try:
            with open(ref, "r", encoding="utf-8") as f:
                return json.load(f)
        except OSError as e:
            raise ReportIOError(f"Failed to read fixture {ref}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigParseError(f"Invalid JSON in fixture {ref}: {e}") from e
    if hasattr(ref, "model_dump"):
        return ref.model_dump()
    return dict(ref)


def post_state_to_dict(post_state) -> Dict[str, Any]:
    if isinstance(post_state, Undetermined):
        return {
            "kind": "undetermined",
            "basis_id": post_state.basis_used.basis_id,
            "conditional_mixture": state_to_dict(post_state.conditional_mixture),
        }
    return state_to_dict(post_state)


def record_to_dict(record: MeasurementRecord) -> Dict[str, Any]:
    data = {
        "postulate": record.postulate,
        "outcome": record.outcome,
        "probability": record.probability,
        "branch_index": record.branch_index,
        "multiplicity": record.multiplicity,
        "determined": record.is_determined,
        "purity": record.purity(),
        "post_state": post_state_to_dict(record.post_state),
    }
    if isinstance(record.post_state, Undetermined):
        data["refinement_basis_id"] = record.post_state.basis_used.basis_id
    return data


def to_jsonable(obj: Any) -> Any:
    """
    Convert reports into plain JSON values.

    Non-finite floats become ``null`` (NaN) or ``"inf"``/``"-inf"``; states and
    operators use the matrix schema; dataclasses become dicts of their fields.
    """
    if isinstance(obj, QuantumState):
        return state_to_dict(obj)
    if isinstance(obj, Undetermined):
        return post_state_to_dict(obj)
    if isinstance(obj, HermitianOperator):
        return operator_to_dict(obj)
    if isinstance(obj, MeasurementRecord):
        return record_to_dict(obj)
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return _split(obj)
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(payload: Any) -> str:
    """Deterministic JSON text (sorted keys, two-space indent)."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"
