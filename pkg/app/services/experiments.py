"""Experiment runners behind the CLI subcommands.

Each runner takes a validated params block and a seed and returns an
ExperimentResult: a JSON payload, a table for CSV output and summary scalars
for the CSV sidecar.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from app.config import settings
from app.config.experiment import (
    ChshParams,
    CondProbParams,
    EprDemoParams,
    ExperimentConfig,
    PostulateCompareParams,
    WindowSweepParams,
    to_complex,
)
from app.errors import DimensionMismatch, IndexOutOfRange, InvalidModelParams
from app.models.chsh import ChshSetting
from app.models.composite import CompositeSpace, EprScenarioReport
from app.models.events import SIDE_A, SIDE_B
from app.models.operators import HermitianOperator
from app.models.state import PureState, QuantumState
from app.services import coincidence
from app.services.chsh import chsh_from_samples, chsh_value, correlation_table, spin_observable
from app.services.composite import (
    PAULI_Z,
    entangled_state,
    lift_observable,
    local_spin_observable,
    partial_trace,
    run_epr_scenario,
)
from app.services.measurement import (
    born_probabilities,
    build_refinement,
    conditional_probability_table,
    luders_measure,
    luders_nonselective,
    rotate_within_eigenspaces,
    von_neumann_measure,
    von_neumann_nonselective,
)
from app.services.spectral import spectral_decompose
from app.utils.rng import SAMPLING_STREAM, spawn_generator
from app.utils.serialization import (
    load_fixture,
    operator_from_dict,
    record_to_dict,
    state_from_dict,
    state_to_dict,
    to_jsonable,
)

logger = logging.getLogger(__name__)

CHSH_COLUMNS = ["theta_a", "theta_b", "E_quantum", "E_sampled", "n", "stderr"]
EPR_COLUMNS = ["outcome_index", "field", "luders", "von_neumann"]
COMPARE_COLUMNS = [
    "outcome_index",
    "outcome",
    "probability",
    "multiplicity",
    "luders_purity",
    "von_neumann_purity",
    "rotated_purity",
    "von_neumann_determined",
    "refinement_difference",
]
CONDPROB_COLUMNS = ["state", "k", "alpha_k", "m", "beta_m", "p_b_given_a", "p_a_given_b", "transition"]

TSIRELSON_BOUND = 2 * math.sqrt(2)
CLASSICAL_BOUND = 2.0


@dataclass
class ExperimentResult:
    experiment: str
    seed: int
    payload: Dict[str, Any]
    table: pd.DataFrame
    summary: Dict[str, Any] = field(default_factory=dict)


def _load_operator(ref, default: Optional[HermitianOperator] = None) -> HermitianOperator:
    if ref is None:
        return default
    return operator_from_dict(load_fixture(ref))


def _load_state(ref, default: Optional[QuantumState] = None) -> QuantumState:
    if ref is None:
        return default
    return state_from_dict(load_fixture(ref))


def _check_dim(name: str, actual: int, expected: int) -> None:
    if actual != expected:
        raise DimensionMismatch(f"{name} has dim {actual}, expected {expected}")


def _describe_luders(report: EprScenarioReport) -> str:
    branch = report.luders_branch
    shape = "product" if branch.is_product else "entangled"
    return f"{shape}, {'sharp' if branch.element_of_reality_assigned else 'not sharp'}"


def _describe_von_neumann(report: EprScenarioReport) -> str:
    branch = report.von_neumann_branch
    if not branch.determined:
        return "undetermined"
    return f"determined, {'sharp' if branch.element_of_reality_assigned else 'not sharp'}"


def run_epr_demo(params: EprDemoParams, seed: int) -> ExperimentResult:
    """Compare the two postulates on ψ = c₁ e₁ⁱ⊗e₂ʲ + c₂ e₁ʲ⊗e₂ⁱ."""
    space = CompositeSpace(params.dim1, params.dim2)
    a1 = _load_operator(params.a1) if params.a1 is not None else local_spin_observable(params.a1_direction)
    a2 = _load_operator(params.a2) if params.a2 is not None else local_spin_observable(params.a2_direction)
    _check_dim("a1", a1.dim, params.dim1)
    _check_dim("a2", a2.dim, params.dim2)

    c1, c2 = to_complex(params.c1), to_complex(params.c2)
    state = entangled_state(c1, c2, params.i, params.j, space)
    lifted1 = spectral_decompose(lift_observable(a1, 1, space))

    if params.outcome_index is not None:
        if params.outcome_index >= len(lifted1):
            raise IndexOutOfRange(
                f"outcome_index {params.outcome_index} outside 0..{len(lifted1) - 1}"
            )
        indices = [params.outcome_index]
    else:
        indices = [
            index
            for index, (_, p) in enumerate(born_probabilities(state, lifted1))
            if p > settings.QMEAS_PROB_FLOOR
        ]

    branches, rows = [], []
    for index in indices:
        report = run_epr_scenario(state, a1, a2, index, params.refinement_outcome)
        luders, vn = report.luders_branch, report.von_neumann_branch
        summary = {"luders": _describe_luders(report), "von_neumann": _describe_von_neumann(report)}
        branches.append(
            {
                "outcome_index": index,
                "outcome": luders.outcome,
                "probability": luders.probability,
                "multiplicity": report.multiplicity,
                "luders": {
                    "post_state": summary["luders"],
                    "state": luders.post_state,
                    "purity": luders.purity,
                    "is_product": luders.is_product,
                    "remote_value": luders.remote_value,
                    "remote_variance": luders.remote_variance,
                    "remote_reduced_state": luders.remote_reduced_state,
                    "element_of_reality_assigned": luders.element_of_reality_assigned,
                },
                "von_neumann": {
                    "post_state": summary["von_neumann"],
                    "state": vn.post_state,
                    "determined": vn.determined,
                    "conditional_mixture": vn.conditional_mixture,
                    "purity": vn.purity,
                    "refinement_id": vn.refinement_id,
                    "refinement_outcome": vn.refinement_outcome,
                    "remote_value": vn.remote_value,
                    "remote_variance": vn.remote_variance,
                    "remote_reduced_state": vn.remote_reduced_state,
                    "element_of_reality_assigned": vn.element_of_reality_assigned,
                },
            }
        )
        for name, left, right in (
            ("outcome", luders.outcome, vn.outcome),
            ("probability", luders.probability, vn.probability),
            ("post_state", summary["luders"], summary["von_neumann"]),
            ("purity", luders.purity, vn.purity),
            ("remote_value", luders.remote_value, vn.remote_value),
            ("remote_variance", luders.remote_variance, vn.remote_variance),
            ("element_of_reality", luders.element_of_reality_assigned, vn.element_of_reality_assigned),
        ):
            rows.append({"outcome_index": index, "field": name, "luders": left, "von_neumann": right})

    payload = {
        "coefficients": {"c1": c1, "c2": c2, "i": params.i, "j": params.j},
        "space": {"dim1": space.dim1, "dim2": space.dim2},
        "state": state_to_dict(state),
        "a1": a1,
        "a2": a2,
        "initial_reduced_state": partial_trace(state, space, keep=2),
        "branches": branches,
    }
    return ExperimentResult(
        experiment="epr-demo",
        seed=seed,
        payload=payload,
        table=pd.DataFrame(rows, columns=EPR_COLUMNS),
        summary={"n_branches": len(branches)},
    )


def _three_term_state() -> PureState:
    psi = np.zeros(4, dtype=complex)
    psi[[0, 1, 2]] = 1 / math.sqrt(3)
    return PureState(psi)


def run_postulate_compare(params: PostulateCompareParams, seed: int) -> ExperimentResult:
    """Selective and nonselective updates under both postulates, with a second refinement."""
    space = CompositeSpace(2, 2)
    default_op = lift_observable(HermitianOperator(PAULI_Z), 1, space)
    op = _load_operator(params.operator, default_op)
    state = _load_state(params.state, _three_term_state() if op.dim == 4 else None)
    if state is None:
        raise DimensionMismatch(f"A state fixture is required for operator dim {op.dim}")
    _check_dim("state", state.dim, op.dim)

    obs = spectral_decompose(op)
    family, d_hat = build_refinement(obs)
    rotated = rotate_within_eigenspaces(family, math.radians(params.rotation_deg))

    branches, rows = [], []
    for index, (_, probability) in enumerate(born_probabilities(state, obs)):
        if probability <= settings.QMEAS_PROB_FLOOR:
            continue
        luders = luders_measure(state, obs, index)
        vn = von_neumann_measure(state, obs, family, index)
        vn_rotated = von_neumann_measure(state, obs, rotated, index)
        difference = float(np.max(np.abs(vn.resulting_density() - vn_rotated.resulting_density())))
        branches.append(
            {
                "outcome_index": index,
                "luders": record_to_dict(luders),
                "von_neumann": record_to_dict(vn),
                "von_neumann_rotated": record_to_dict(vn_rotated),
                "refinement_difference": difference,
                "luders_vs_von_neumann": float(
                    np.max(np.abs(luders.resulting_density() - vn.resulting_density()))
                ),
            }
        )
        rows.append(
            {
                "outcome_index": index,
                "outcome": luders.outcome,
                "probability": luders.probability,
                "multiplicity": luders.multiplicity,
                "luders_purity": luders.purity(),
                "von_neumann_purity": vn.purity(),
                "rotated_purity": vn_rotated.purity(),
                "von_neumann_determined": vn.is_determined,
                "refinement_difference": difference,
            }
        )

    nonselective_luders = luders_nonselective(state, obs)
    nonselective_vn = von_neumann_nonselective(state, family)
    nonselective_rotated = von_neumann_nonselective(state, rotated)
    payload = {
        "operator": op,
        "state": state,
        "spectrum": [
            {"eigenvalue": b.eigenvalue, "multiplicity": b.multiplicity} for b in obs.branches
        ],
        "refinement": {"id": family.basis_id, "labels": family.flat_labels, "operator": d_hat},
        "rotated_refinement": {
            "id": rotated.basis_id,
            "rotation_deg": params.rotation_deg,
        },
        "branches": branches,
        "nonselective": {
            "luders": nonselective_luders,
            "von_neumann": nonselective_vn,
            "von_neumann_rotated": nonselective_rotated,
            "refinement_difference": float(
                np.max(np.abs(nonselective_vn.matrix - nonselective_rotated.matrix))
            ),
        },
    }
    logger.info(f"Compared postulates over {len(branches)} outcome(s) of a dim-{op.dim} observable")
    return ExperimentResult(
        experiment="postulate-compare",
        seed=seed,
        payload=payload,
        table=pd.DataFrame(rows, columns=COMPARE_COLUMNS),
        summary={"refinement_id": family.basis_id, "rotated_refinement_id": rotated.basis_id},
    )


def singlet_state() -> PureState:
    """(e⁰⊗e¹ − e¹⊗e⁰)/√2."""
    return PureState(np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2))


def run_chsh(params: ChshParams, seed: int) -> ExperimentResult:
    """Analytic and sampled CHSH correlations."""
    state = _load_state(params.state, singlet_state())
    _check_dim("state", state.dim, 4)
    setting = ChshSetting(params.a, params.a_prime, params.b, params.b_prime)

    value = chsh_value(state, setting)
    rng = spawn_generator(seed, SAMPLING_STREAM)
    rows, samples = correlation_table(state, setting, params.n_samples, rng, grid=params.grid)
    sampled, std_error = chsh_from_samples(samples)

    summary = {
        "S": value,
        "abs_S": abs(value),
        "S_sampled": sampled,
        "stderr_S": std_error,
        "tsirelson_bound": TSIRELSON_BOUND,
        "classical_bound": CLASSICAL_BOUND,
    }
    logger.info(f"CHSH S={value:.6f} (sampled {sampled:.4f} ± {std_error:.4f})")
    payload = {
        "angles": {"a": setting.a, "a_prime": setting.a_prime, "b": setting.b, "b_prime": setting.b_prime},
        "state": state,
        "n_samples": params.n_samples,
        "rows": rows,
        **summary,
    }
    return ExperimentResult(
        experiment="chsh",
        seed=seed,
        payload=payload,
        table=pd.DataFrame(rows, columns=CHSH_COLUMNS),
        summary=summary,
    )


def _streams_from_file(path: str):
    streams = coincidence.load_clicks(path)
    side_a = [s for (side, _), s in streams.items() if side == SIDE_A]
    side_b = [s for (side, _), s in streams.items() if side == SIDE_B]
    if len(side_a) != 2 or len(side_b) != 2:
        raise InvalidModelParams(
            f"Click table needs two settings per side, got {len(side_a)} (A) and {len(side_b)} (B)"
        )
    n_pairs = len(np.unique(np.concatenate([s.pair_id for s in side_a + side_b])))
    return side_a, side_b, n_pairs


def _sweep_row_payload(row: coincidence.SweepRow) -> Dict[str, Any]:
    data = row.as_table_row()
    data["stderr"] = {
        f"E_{key}": estimate.std_error for key, estimate in zip(coincidence.SETTING_KEYS, row.estimates)
    }
    data["abs_S"] = abs(row.S)
    data["matched_counts"] = row.matched_counts
    data["jaccard_b"] = row.jaccard_b
    return data


def run_window_sweep(params: WindowSweepParams, seed: int) -> ExperimentResult:
    """Simulate (or load) click streams and sweep the coincidence window."""
    if params.clicks_path:
        streams_a, streams_b, n_pairs = _streams_from_file(params.clicks_path)
        rows = coincidence.reanalyze_clicks(streams_a, streams_b, params.windows, n_pairs)
        source = {"clicks_path": params.clicks_path}
        angles = {
            "a": streams_a[0].setting_angle,
            "a_prime": streams_a[1].setting_angle,
            "b": streams_b[0].setting_angle,
            "b_prime": streams_b[1].setting_angle,
        }
    else:
        angles = {"a": params.a, "a_prime": params.a_prime, "b": params.b, "b_prime": params.b_prime}
        result = coincidence.run_window_sweep(
            n_pairs=params.n_pairs,
            seed=seed,
            windows=params.windows,
            angles=angles,
            model_name=params.model.name,
            model_params=params.model.model_kwargs(),
            jitter_scale=params.jitter_scale,
            spacing=params.spacing,
        )
        rows, n_pairs = result.rows, result.n_pairs
        streams_a, streams_b = result.streams_a, result.streams_b
        source = {
            "model": result.model,
            "jitter_scale": params.jitter_scale,
            "emission_spacing": params.spacing,
        }
        if params.export_clicks_dir:
            path = os.path.join(params.export_clicks_dir, "clicks.csv")
            coincidence.export_clicks(streams_a + streams_b, path)
            source["clicks_export"] = path
            logger.info(f"Exported click streams to {path}")

    table = pd.DataFrame([row.as_table_row() for row in rows], columns=coincidence.SWEEP_COLUMNS)
    max_abs_s = max(abs(row.S) for row in rows) if rows else math.nan
    summary = {"n_pairs": n_pairs, "n_windows": len(rows), "max_abs_S": max_abs_s}
    payload = {
        "n_pairs": n_pairs,
        "angles": angles,
        "source": source,
        "rows": [_sweep_row_payload(row) for row in rows],
        **summary,
    }
    return ExperimentResult(
        experiment="window-sweep", seed=seed, payload=payload, table=table, summary=summary
    )


def run_condprob(params: CondProbParams, seed: int) -> ExperimentResult:
    """Conditional probabilities in both directions for two states."""
    a = _load_operator(params.a) if params.a is not None else spin_observable(params.a_theta)
    b = _load_operator(params.b) if params.b is not None else spin_observable(params.b_theta)
    _check_dim("b", b.dim, a.dim)
    default_state = PureState([math.cos(math.pi / 8), math.sin(math.pi / 8)]) if a.dim == 2 else None
    default_compare = PureState(np.array([1, 1j]) / math.sqrt(2)) if a.dim == 2 else None
    state = _load_state(params.state, default_state)
    compare = _load_state(params.compare_state, default_compare)
    if state is None or compare is None:
        raise DimensionMismatch(f"State fixtures are required for observables of dim {a.dim}")
    _check_dim("state", state.dim, a.dim)
    _check_dim("compare_state", compare.dim, a.dim)

    obs_a, obs_b = spectral_decompose(a), spectral_decompose(b)
    tables = {
        "state": conditional_probability_table(state, obs_a, obs_b),
        "compare_state": conditional_probability_table(compare, obs_a, obs_b),
    }

    asymmetry, state_dependence = 0.0, 0.0
    for first, second in zip(tables["state"], tables["compare_state"]):
        for row in (first, second):
            if row["p_b_given_a"] is not None and row["p_a_given_b"] is not None:
                asymmetry = max(asymmetry, abs(row["p_b_given_a"] - row["p_a_given_b"]))
        if first["p_b_given_a"] is not None and second["p_b_given_a"] is not None:
            state_dependence = max(state_dependence, abs(first["p_b_given_a"] - second["p_b_given_a"]))

    rows: List[Dict[str, Any]] = [
        {"state": name, **row} for name, table in tables.items() for row in table
    ]
    summary = {"max_asymmetry": asymmetry, "max_state_dependence": state_dependence}
    payload = {
        "a": a,
        "b": b,
        "states": {"state": state, "compare_state": compare},
        "tables": tables,
        **summary,
    }
    return ExperimentResult(
        experiment="condprob",
        seed=seed,
        payload=payload,
        table=pd.DataFrame(rows, columns=CONDPROB_COLUMNS),
        summary=summary,
    )


RUNNERS: Dict[str, Callable[[Any, int], ExperimentResult]] = {
    "epr-demo": run_epr_demo,
    "postulate-compare": run_postulate_compare,
    "chsh": run_chsh,
    "window-sweep": run_window_sweep,
    "condprob": run_condprob,
}


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run the experiment a validated config names."""
    result = RUNNERS[config.experiment](config.params, config.seed)
    result.payload = to_jsonable(result.payload)
    return result

