import math

import numpy as np
import pytest

from app.errors import (
    DegenerateLocalObservable,
    DimensionMismatch,
    EqualIndices,
    IndexOutOfRange,
    NonUnitDirection,
    NotNormalized,
)
from app.models.composite import CompositeSpace
from app.models.operators import HermitianOperator
from app.models.state import PureState, Undetermined
from app.services.composite import (
    entangled_state,
    is_product_state,
    lift_observable,
    local_spin_observable,
    partial_trace,
    product_label_decoders,
    product_refinement,
    run_epr_scenario,
    sample_epr_scenario,
    schmidt_like_state,
    spin_refinement_example,
    state_from_coefficients,
)
from app.services.spectral import is_degenerate, spectral_decompose, variance
from app.utils.rng import random_hermitian


def test_entangled_state_vector(qubit_pair):
    state = entangled_state(0.6, 0.8, 0, 1, qubit_pair)
    np.testing.assert_allclose(state.vector, [0, 0.6, 0.8, 0], atol=1e-15)


def test_entangled_state_validation(qubit_pair):
    with pytest.raises(NotNormalized):
        entangled_state(0.6, 0.6, 0, 1, qubit_pair)
    with pytest.raises(EqualIndices):
        entangled_state(0.6, 0.8, 1, 1, qubit_pair)
    with pytest.raises(IndexOutOfRange):
        entangled_state(0.6, 0.8, 0, 2, qubit_pair)


def test_composite_space_needs_two_levels():
    with pytest.raises(DimensionMismatch):
        CompositeSpace(1, 2)


def test_singlet_reduced_states_are_maximally_mixed(singlet, qubit_pair):
    for keep in (1, 2):
        np.testing.assert_allclose(partial_trace(singlet, qubit_pair, keep).matrix, np.eye(2) / 2, atol=1e-12)
    assert not is_product_state(singlet, qubit_pair)


def test_product_state_detection(qubit_pair):
    product = state_from_coefficients([[0.6, 0.8], [0, 0]], qubit_pair)
    assert is_product_state(product, qubit_pair)
    assert is_product_state(product.as_density(), qubit_pair)


def test_state_from_coefficients_matches_three_term_state(three_term_state, qubit_pair):
    c = 1 / math.sqrt(3)
    state = state_from_coefficients([[c, c], [c, 0]], qubit_pair)
    np.testing.assert_allclose(state.vector, three_term_state.vector, atol=1e-15)


def test_schmidt_like_state(qubit_pair):
    state = schmidt_like_state([0.8, 0.6], qubit_pair)
    np.testing.assert_allclose(state.vector, [0.8, 0, 0, 0.6], atol=1e-15)
    with pytest.raises(IndexOutOfRange):
        schmidt_like_state([0.6, 0.6, 0.52], qubit_pair)


def test_lift_observable_dimension_check(sigma_z):
    space = CompositeSpace(3, 2)
    assert lift_observable(sigma_z, 2, space).dim == 6
    with pytest.raises(DimensionMismatch):
        lift_observable(sigma_z, 1, space)


def test_local_spin_observable_requires_unit_direction():
    with pytest.raises(NonUnitDirection):
        local_spin_observable([1.0, 1.0, 0.0])
    op = local_spin_observable([1 / math.sqrt(2), 0.0, 1 / math.sqrt(2)])
    assert spectral_decompose(op).eigenvalues == pytest.approx([-1.0, 1.0])


def test_spin_refinement_labels():
    refinement = spin_refinement_example()
    # standard basis order e⁰e⁰, e⁰e¹, e¹e⁰, e¹e¹ with e⁰ = spin up:
    # ++ = 3, +− = 1, −+ = 2, −− = 0
    np.testing.assert_allclose(refinement.operator.entries, np.diag([3, 1, 2, 0]), atol=1e-12)
    assert refinement.decode_first(1.0) == pytest.approx(1.0)
    assert refinement.decode_second(1.0) == pytest.approx(-1.0)


def test_product_refinement_on_qutrits():
    a = HermitianOperator.diagonal([0.0, 1.0, 2.0])
    family, d_hat = product_refinement(a, a)
    assert family.group_sizes == [3, 3, 3]
    assert sorted(family.flat_labels.tolist()) == list(range(9))
    assert not any(b.multiplicity > 1 for b in spectral_decompose(d_hat))
    decode_first, decode_second = product_label_decoders(a, a)
    # label α + 3β
    assert decode_first(7.0) == pytest.approx(1.0)
    assert decode_second(7.0) == pytest.approx(2.0)


def test_product_refinement_rejects_degenerate_local():
    with pytest.raises(DegenerateLocalObservable):
        product_refinement(HermitianOperator.identity(2), HermitianOperator.identity(2))


def test_epr_scenario_across_coefficient_grid(qubit_pair, sigma_z):
    lifted2 = lift_observable(sigma_z, 2, qubit_pair)
    for modulus in np.linspace(0.11, 0.99, 10):
        for phase in np.linspace(0, 2 * math.pi, 10, endpoint=False):
            c1 = modulus * np.exp(1j * phase)
            c2 = math.sqrt(1 - modulus**2)
            state = entangled_state(c1, c2, 0, 1, qubit_pair)
            for index in (0, 1):
                report = run_epr_scenario(state, sigma_z, sigma_z, index)
                luders = report.luders_branch
                assert variance(luders.post_state, lifted2) < 1e-9
                assert luders.element_of_reality_assigned
                assert luders.is_product
                assert luders.purity == pytest.approx(1.0, abs=1e-9)
                assert isinstance(report.von_neumann_branch.post_state, Undetermined)
                assert not report.von_neumann_branch.determined
                assert not report.von_neumann_branch.element_of_reality_assigned


def test_epr_scenario_remote_value(epr_state, sigma_z):
    report = run_epr_scenario(epr_state(0.6, 0.8), sigma_z, sigma_z, 1)
    # outcome +1 on side 1 leaves e⁰⊗e¹, so side 2 reads −1
    assert report.luders_branch.outcome == pytest.approx(1.0)
    assert report.luders_branch.probability == pytest.approx(0.36)
    assert report.luders_branch.remote_value == pytest.approx(-1.0)
    np.testing.assert_allclose(report.luders_branch.remote_reduced_state.matrix, np.diag([0, 1]), atol=1e-12)
    assert report.multiplicity == 2


def test_epr_scenario_with_observed_refinement_outcome(epr_state, sigma_z):
    report = run_epr_scenario(epr_state(0.6, 0.8), sigma_z, sigma_z, 1, refinement_outcome=0)
    branch = report.von_neumann_branch
    assert branch.determined
    assert isinstance(branch.post_state, PureState)
    assert branch.element_of_reality_assigned
    assert branch.refinement_outcome == 0


def test_epr_scenario_refinement_outcome_out_of_range(epr_state, sigma_z):
    with pytest.raises(IndexOutOfRange):
        run_epr_scenario(epr_state(0.6, 0.8), sigma_z, sigma_z, 1, refinement_outcome=5)


def test_epr_scenario_dimension_mismatch(sigma_z):
    with pytest.raises(DimensionMismatch):
        run_epr_scenario(PureState([1, 0]), sigma_z, sigma_z, 0)


def test_sampled_epr_scenario_is_reproducible(epr_state, sigma_z):
    state = epr_state(0.6, 0.8)
    first = sample_epr_scenario(state, sigma_z, sigma_z, np.random.default_rng(11))
    second = sample_epr_scenario(state, sigma_z, sigma_z, np.random.default_rng(11))
    assert first.outcome_index == second.outcome_index
    assert first.luders_branch.outcome == second.luders_branch.outcome


def test_no_local_operator_refines_a_lifted_observable(rng):
    for dim1, dim2 in [(2, 2), (3, 2), (2, 3)]:
        space = CompositeSpace(dim1, dim2)
        for _ in range(20):
            local = HermitianOperator(random_hermitian(dim1, rng))
            assert is_degenerate(spectral_decompose(lift_observable(local, 1, space)))


def test_opposite_coefficients_give_the_singlet(epr_state, singlet):
    state = epr_state(1 / math.sqrt(2), -1 / math.sqrt(2))
    np.testing.assert_allclose(state.vector, singlet.vector, atol=1e-15)
    product = epr_state(1.0, 0.0)
    assert is_product_state(product, CompositeSpace(2, 2))
