"""
합성 데이터 생성 테스트
"""
import json

import numpy as np
import pytest

from conftest import make_config
from fleet_anomaly.core import least_squares
from fleet_anomaly.datagen import GenConfig, covariance_factor, default_paper_config, generate_fleet, mvn_sample
from fleet_anomaly.errors import DomainError


def test_reference_config_constants():
    config = default_paper_config()
    assert (config.n_systems, config.n_obs, config.dim) == (200, 500, 4)
    assert config.noise_variance == 0.83
    assert config.anomaly_indices == (27, 161, 183)


def test_reference_defaults_file_matches_builtin():
    from fleet_anomaly.config import FleetAnomalyConfig
    loaded = GenConfig.from_json_file(FleetAnomalyConfig().get_paper_config_path())
    assert loaded.config_hash() == default_paper_config(seed=0).config_hash()


def test_zero_covariance_returns_mean():
    rng = np.random.Generator(np.random.PCG64(0))
    mean = np.array([1.0, -2.0])
    np.testing.assert_array_equal(mvn_sample(mean, np.zeros((2, 2)), rng), mean)


def test_sample_moments():
    rng = np.random.Generator(np.random.PCG64(42))
    draws = mvn_sample(np.zeros(2), np.eye(2), rng, size=100000)
    assert np.all(np.abs(draws.mean(axis=0)) < 0.02)

    draws = mvn_sample(np.zeros(2), np.diag([4.0, 9.0]), rng, size=100000)
    np.testing.assert_allclose(draws.var(axis=0), [4.0, 9.0], rtol=0.05)


def test_covariance_factor_rejects_indefinite():
    with pytest.raises(DomainError):
        covariance_factor(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_covariance_factor_accepts_semidefinite():
    factor = covariance_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(factor @ factor.T, [[1.0, 1.0], [1.0, 1.0]], atol=1e-8)


def test_config_validation():
    with pytest.raises(DomainError):
        make_config(anomalies=(99,))
    with pytest.raises(DomainError):
        make_config(noise_variance=-1.0)
    values = make_config().to_dict()
    del values['dim']
    with pytest.raises(DomainError):
        GenConfig.from_dict(values)


def test_missing_config_file_is_domain_error(tmp_path):
    with pytest.raises(DomainError):
        GenConfig.from_json_file(str(tmp_path / 'missing.json'))


def test_config_json_round_trip(tmp_path):
    config = make_config(seed=5)
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(config.to_dict()))
    assert GenConfig.from_json_file(str(path)).config_hash() == config.config_hash()


def test_noise_free_generation_recovers_nominal():
    config = make_config(anomalies=(), noise_variance=0.0)
    fleet = generate_fleet(config)
    for system in fleet.systems:
        np.testing.assert_allclose(least_squares(system), config.nominal_mean, atol=1e-12)


def test_reference_fleet_dimensions():
    config = default_paper_config(seed=1)
    fleet = generate_fleet(config)
    assert fleet.n_systems == 200
    assert all(system.regressors.shape == (500, 4) for system in fleet.systems)
    assert fleet.truth.anomaly_indices == (27, 161, 183)


def test_generation_is_deterministic_per_seed():
    first = generate_fleet(make_config(seed=9))
    second = generate_fleet(make_config(seed=9))
    third = generate_fleet(make_config(seed=10))
    for a, b in zip(first.systems, second.systems):
        np.testing.assert_array_equal(a.measurements, b.measurements)
        np.testing.assert_array_equal(a.regressors, b.regressors)
    assert not np.array_equal(first.systems[0].measurements, third.systems[0].measurements)


def test_anomalous_systems_use_anomalous_mean():
    config = make_config(anomalies=(2,), noise_variance=0.0)
    fleet = generate_fleet(config)
    np.testing.assert_array_equal(fleet.truth.nominal_params[1], config.anomal_mean)
    np.testing.assert_array_equal(fleet.truth.nominal_params[0], config.nominal_mean)


@pytest.mark.parametrize('n_systems', [100, 400, 1600])
def test_normal_parameter_mean_within_clt_band(n_systems):
    config = make_config(n_systems=n_systems, n_obs=3, anomalies=(), nominal_spread=0.25, seed=17)
    fleet = generate_fleet(config)
    # 표준편차 0.5, 3σ/√N 띠
    band = 3.0 * 0.5 / np.sqrt(n_systems)
    empirical = fleet.truth.nominal_params.mean(axis=0)
    assert np.all(np.abs(empirical - config.nominal_mean) <= band)
