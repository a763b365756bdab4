"""
근접 연산자와 단일 블록 풀이 테스트
"""
import numpy as np
import pytest

from fleet_anomaly.errors import DomainError
from fleet_anomaly.prox import (GramBlock, alternating_local_solve, block_soft_threshold, dual_norm,
                                group_lasso_block, prox_norm, soft_threshold)


def _random_block(seed: int, dim: int = 3):
    rng = np.random.default_rng(seed)
    regressors = rng.standard_normal((4 * dim, dim))
    return GramBlock(regressors.T @ regressors), rng.standard_normal(dim) * 5.0


def test_soft_threshold():
    np.testing.assert_array_equal(soft_threshold(np.array([3.0, -1.0, 0.5, -4.0]), 1.0), [2.0, 0.0, 0.0, -3.0])


def test_block_soft_threshold():
    np.testing.assert_allclose(block_soft_threshold(np.array([3.0, 4.0]), 1.0), [2.4, 3.2])
    np.testing.assert_array_equal(block_soft_threshold(np.array([3.0, 4.0]), 5.0), [0.0, 0.0])


def test_prox_norm_rejects_unknown_order():
    with pytest.raises(DomainError):
        prox_norm(np.ones(2), 1.0, 3)


def test_dual_norm_orders():
    vector = np.array([3.0, -4.0])
    assert dual_norm(vector, 2) == pytest.approx(5.0)
    assert dual_norm(vector, 1) == 4.0


@pytest.mark.parametrize('seed', range(5))
def test_group_block_satisfies_stationarity(seed):
    block, linear = _random_block(seed)
    lam = 0.5 * dual_norm(2.0 * linear, 2)
    d = group_lasso_block(block, linear, lam, 2)
    assert np.linalg.norm(d) > 0
    gradient = 2.0 * block.gram @ d - 2.0 * linear + lam * d / np.linalg.norm(d)
    assert np.max(np.abs(gradient)) < 1e-8 * (1.0 + np.max(np.abs(linear)))


@pytest.mark.parametrize('seed', range(5))
def test_lasso_block_satisfies_stationarity(seed):
    block, linear = _random_block(seed)
    lam = 0.5 * dual_norm(2.0 * linear, 1)
    d = group_lasso_block(block, linear, lam, 1)
    gradient = 2.0 * block.gram @ d - 2.0 * linear
    active = d != 0.0
    assert np.any(active)
    assert np.max(np.abs(gradient[active] + lam * np.sign(d[active]))) < 1e-7
    assert np.all(np.abs(gradient[~active]) <= lam + 1e-7)


@pytest.mark.parametrize('p', [1, 2])
def test_block_fuses_below_dual_bound(p):
    block, linear = _random_block(3)
    lam = dual_norm(2.0 * linear, p)
    np.testing.assert_array_equal(group_lasso_block(block, linear, lam, p), np.zeros(3))


def test_block_without_penalty_is_least_squares():
    block, linear = _random_block(4)
    np.testing.assert_allclose(group_lasso_block(block, linear, 0.0, 2), np.linalg.solve(block.gram, linear))


def test_alternating_solve_without_penalty_decouples():
    rng = np.random.default_rng(8)
    regressors = rng.standard_normal((10, 2))
    gram = regressors.T @ regressors
    rho = 1.5
    base_rhs = rng.standard_normal(2)
    anchor = rng.standard_normal(2)
    matrix = 2.0 * gram + 2.0 * rho * np.eye(2)

    alpha, delta, iterations = alternating_local_solve(lambda rhs: np.linalg.solve(matrix, rhs), base_rhs,
                                                       anchor, np.zeros(2), 0.0, rho, 2, 1e-12, 200)
    # δ = anchor − α 를 대입하면 (2G + ρI)α = base_rhs − ρ·anchor
    expected = np.linalg.solve(2.0 * gram + rho * np.eye(2), base_rhs - rho * anchor)
    np.testing.assert_allclose(alpha, expected, atol=1e-9)
    np.testing.assert_allclose(alpha + delta, anchor, atol=1e-9)
    assert iterations >= 1
