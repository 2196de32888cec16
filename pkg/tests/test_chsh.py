import math

import numpy as np
import pytest

from app.errors import DimensionMismatch, EmptySample
from app.models.chsh import ChshSetting
from app.models.state import DensityOperator, PureState
from app.services.chsh import (
    chsh_from_samples,
    chsh_value,
    correlation_table,
    estimate_correlation,
    quantum_correlation,
    sample_correlation_pairs,
    spin_observable,
)
from app.utils.rng import random_density_matrix, random_pure_vector

TSIRELSON = 2 * math.sqrt(2)


def test_singlet_correlation_is_minus_cosine(singlet):
    grid = [(k * math.pi / 6, m * math.pi / 4) for k in range(6) for m in range(4)]
    for theta_a, theta_b in grid:
        value = quantum_correlation(singlet, spin_observable(theta_a), spin_observable(theta_b))
        assert value == pytest.approx(-math.cos(theta_a - theta_b), abs=1e-12)


def test_singlet_reaches_tsirelson_bound(singlet):
    value = chsh_value(singlet, ChshSetting.tsirelson())
    assert value == pytest.approx(-TSIRELSON, abs=1e-9)


def test_chsh_never_exceeds_tsirelson_bound(rng):
    for _ in range(1000):
        state = PureState(random_pure_vector(4, rng))
        angles = rng.uniform(0, 2 * math.pi, size=4)
        setting = ChshSetting(*angles)
        assert abs(chsh_value(state, setting)) <= TSIRELSON + 1e-9


def test_mixed_states_stay_within_bound(rng):
    for _ in range(50):
        rho = DensityOperator(random_density_matrix(4, rng))
        assert abs(chsh_value(rho, ChshSetting.tsirelson())) <= TSIRELSON + 1e-9


def test_correlation_dimension_mismatch(sigma_z):
    with pytest.raises(DimensionMismatch):
        quantum_correlation(PureState([1, 0]), sigma_z, sigma_z)


def test_sampled_chsh_within_three_sigma(singlet):
    generator = np.random.default_rng(5)
    setting = ChshSetting.tsirelson()
    samples = [
        sample_correlation_pairs(singlet, spin_observable(ta), spin_observable(tb), 100_000, generator)
        for ta, tb in setting.pairs()
    ]
    value, std_error = chsh_from_samples(samples)
    assert std_error > 0
    assert abs(value - chsh_value(singlet, setting)) <= 3 * std_error


def test_sampled_pairs_are_reproducible(singlet):
    obs = spin_observable(0.0)
    first = sample_correlation_pairs(singlet, obs, obs, 50, np.random.default_rng(1))
    second = sample_correlation_pairs(singlet, obs, obs, 50, np.random.default_rng(1))
    np.testing.assert_array_equal(first, second)
    # aligned analyzers on the singlet are perfectly anticorrelated
    assert np.all(first[:, 0] == -first[:, 1])


def test_estimate_correlation_edge_cases():
    with pytest.raises(EmptySample):
        estimate_correlation([])
    single = estimate_correlation([(1, -1)])
    assert single.value == -1
    assert math.isnan(single.std_error)
    estimate = estimate_correlation([(1, 1), (1, -1), (-1, -1), (-1, -1)])
    assert estimate.value == pytest.approx(0.5)
    assert estimate.n_pairs == 4


def test_chsh_from_samples_propagates_undefined_error():
    samples = [[(1, 1)], [(1, -1)], [(1, 1)], [(1, 1)]]
    value, std_error = chsh_from_samples(samples)
    assert value == pytest.approx(4.0)
    assert math.isnan(std_error)


def test_chsh_from_samples_needs_four_settings():
    with pytest.raises(ValueError):
        chsh_from_samples([[(1, 1)]] * 3)


def test_chsh_from_samples_with_estimates():
    samples = [[(1, 1), (1, 1)], [(1, -1), (1, -1)], [(-1, 1), (1, -1)], [(1, 1), (-1, -1)]]
    value, _, estimates = chsh_from_samples(samples, return_estimates=True)
    assert [e.value for e in estimates] == [1.0, -1.0, -1.0, 1.0]
    assert value == pytest.approx(1.0 + 1.0 - 1.0 + 1.0)


def test_correlation_table_rows(singlet):
    rows, samples = correlation_table(singlet, ChshSetting.tsirelson(), 200, np.random.default_rng(2), grid=2)
    assert len(rows) == 4 + 4
    assert len(samples) == 4
    assert rows[0]["theta_b"] == pytest.approx(math.pi / 4)
    assert rows[0]["E_quantum"] == pytest.approx(-math.sqrt(0.5))
    for row in rows:
        assert -1.0 <= row["E_sampled"] <= 1.0
        assert row["n"] == 200


def test_non_finite_angle_rejected():
    with pytest.raises(ValueError):
        ChshSetting(a=math.nan, a_prime=0.0, b=0.0, b_prime=0.0)


def test_product_state_correlation(sigma_z):
    up_up = PureState([1, 0, 0, 0])
    assert quantum_correlation(up_up, sigma_z, sigma_z) == pytest.approx(1.0)


def test_product_states_respect_classical_bound(rng):
    for _ in range(200):
        state = PureState(np.kron(random_pure_vector(2, rng), random_pure_vector(2, rng)))
        setting = ChshSetting(*rng.uniform(0, 2 * math.pi, size=4))
        assert abs(chsh_value(state, setting)) <= 2 + 1e-9


def test_equal_b_settings_cancel(singlet):
    setting = ChshSetting(a=0.2, a_prime=1.3, b=0.7, b_prime=0.7)
    expected = 2 * quantum_correlation(singlet, spin_observable(1.3), spin_observable(0.7))
    assert chsh_value(singlet, setting) == pytest.approx(expected, abs=1e-12)


def test_perfectly_correlated_samples():
    value, _ = chsh_from_samples([[(1, 1)] * 10] * 4)
    assert value == pytest.approx(2.0)
