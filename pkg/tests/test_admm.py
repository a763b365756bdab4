"""
분산 ADMM 솔버 테스트
"""
import numpy as np
import pytest

from conftest import make_fleet
from fleet_anomaly.admm import (AdmmNodeState, augmented_lagrangian, consensus_update, dual_update,
                                default_rho, local_primal_update, local_subproblem, readout, rho_update,
                                run_distributed, starting_point, stopping_check, stopping_thresholds)
from fleet_anomaly.config import AdmmConfig, SolverConfig
from fleet_anomaly.core import SystemDataset, least_squares
from fleet_anomaly.detection_analyzer import DetectionAnalyzer
from fleet_anomaly.errors import DomainError, NonConvergenceError, ProtocolError
from fleet_anomaly.solver import compute_lambda_max, solve_group_lasso
from fleet_anomaly.transports.frame import BroadcastMessage
from fleet_anomaly.transports.in_process_bus import InProcessBus
from fleet_anomaly.transports.loopback_socket import LoopbackSocketTransport

TIGHT = dict(eps_abs=1e-9, eps_rel=1e-9, max_iterations=20000)


def random_node(seed=0, dim=2, n_obs=12, rho=1.5):
    rng = np.random.default_rng(seed)
    data = SystemDataset(measurements=rng.normal(size=n_obs), regressors=rng.normal(size=(n_obs, dim)))
    node = AdmmNodeState.initialize(0, data, rho, alpha=rng.normal(size=dim), beta=rng.normal(size=dim))
    node.u = rng.normal(size=dim)
    node.w = rng.normal(size=dim)
    return node, rng


def message(sender, beta, w, iteration=1):
    return BroadcastMessage(iteration=iteration, sender=sender, beta=np.asarray(beta, dtype=float),
                            w=np.asarray(w, dtype=float))


def test_local_primal_update_arithmetic():
    node, _ = random_node()
    node.alpha = np.array([1.0, 2.0])
    node.u = np.array([2.0, -2.0])
    node.rho = 2.0
    np.testing.assert_array_equal(local_primal_update(node), [0.0, 3.0])

    node.u = np.zeros(2)
    np.testing.assert_array_equal(local_primal_update(node), node.alpha)


def test_consensus_single_node():
    theta = consensus_update([message(0, [1.0, 4.0], [2.0, -2.0])], rho=2.0, n_nodes=1)
    np.testing.assert_array_equal(theta, [0.0, 5.0])


def test_consensus_already_reached():
    received = [message(j, [0.3, -1.7], [0.0, 0.0]) for j in range(4)]
    np.testing.assert_allclose(consensus_update(received, rho=1.0, n_nodes=4), [0.3, -1.7], rtol=1e-15)


def test_consensus_is_order_independent_up_to_rounding():
    rng = np.random.default_rng(5)
    received = [message(j, rng.normal(size=3), rng.normal(size=3)) for j in range(5)]
    theta = consensus_update(received, rho=0.7, n_nodes=5)
    reverse = sum(m.beta - m.w / 0.7 for m in reversed(received)) / 5
    np.testing.assert_allclose(theta, reverse, atol=1e-12)
    # 받은 순서가 달라도 보낸 노드 순으로 합산
    np.testing.assert_array_equal(consensus_update(list(reversed(received)), rho=0.7, n_nodes=5), theta)


def test_consensus_rejects_missing_and_duplicate_messages():
    with pytest.raises(ProtocolError) as missing:
        consensus_update([message(0, [1.0], [0.0]), message(2, [1.0], [0.0])], rho=1.0, n_nodes=3)
    assert missing.value.node == 1

    with pytest.raises(ProtocolError) as duplicate:
        consensus_update([message(0, [1.0], [0.0]), message(0, [2.0], [0.0])], rho=1.0, n_nodes=1)
    assert duplicate.value.node == 0

    with pytest.raises(ProtocolError):
        consensus_update([message(0, [1.0], [0.0]), message(5, [1.0], [0.0])], rho=1.0, n_nodes=1)


def test_dual_update_arithmetic():
    node, _ = random_node()
    node.u = np.zeros(2)
    node.w = np.array([0.5, 0.5])
    alpha, beta = np.zeros(2), np.array([1.0, 1.0])
    dual_update(node, np.array([1.0, 0.0]), beta, alpha, beta, rho=1.0)
    np.testing.assert_array_equal(node.u, [1.0, 0.0])
    np.testing.assert_array_equal(node.w, [0.5, 0.5])


def test_dual_update_without_residual_keeps_multipliers():
    node, rng = random_node(seed=2)
    u, w = node.u.copy(), node.w.copy()
    alpha, beta = rng.normal(size=2), rng.normal(size=2)
    dual_update(node, alpha.copy(), beta.copy(), alpha, beta, rho=3.0)
    np.testing.assert_array_equal(node.u, u)
    np.testing.assert_array_equal(node.w, w)


def test_local_subproblem_zero_lambda_closed_form():
    node, rng = random_node(seed=1)
    theta_i, theta = rng.normal(size=2), rng.normal(size=2)
    alpha, beta = local_subproblem(node, theta_i, theta, lam=0.0, p=2, rho=node.rho)

    matrix = 2.0 * node.data.gram + node.rho * np.eye(2)
    expected_alpha = np.linalg.solve(matrix, 2.0 * node.data.moment + node.u + node.rho * theta_i)
    np.testing.assert_allclose(alpha, expected_alpha, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(beta, theta + node.w / node.rho, rtol=1e-8, atol=1e-10)


def test_local_subproblem_fuses_under_large_lambda():
    node, rng = random_node(seed=4)
    theta_i, theta = rng.normal(size=2), rng.normal(size=2)
    alpha, beta = local_subproblem(node, theta_i, theta, lam=1e6, p=2, rho=node.rho)
    np.testing.assert_array_equal(alpha, beta)

    # β = α 일 때 남는 매끄러운 항의 최소점
    matrix = 2.0 * node.data.gram + 2.0 * node.rho * np.eye(2)
    rhs = 2.0 * node.data.moment + node.u + node.w + node.rho * (theta_i + theta)
    np.testing.assert_allclose(alpha, np.linalg.solve(matrix, rhs), rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize('p', [1, 2])
def test_local_subproblem_beats_random_perturbations(p):
    node, rng = random_node(seed=7)
    theta_i, theta = rng.normal(size=2), rng.normal(size=2)
    lam = 1.3
    alpha, beta = local_subproblem(node, theta_i, theta, lam=lam, p=p, rho=node.rho)

    def objective(a, b):
        residual = node.data.measurements - node.data.regressors @ a
        return (float(residual @ residual) + lam * np.linalg.norm(b - a, ord=p) - node.u @ a - node.w @ b
                + 0.5 * node.rho * np.sum((theta_i - a) ** 2) + 0.5 * node.rho * np.sum((theta - b) ** 2))

    best = objective(alpha, beta)
    for _ in range(1000):
        scale = 10.0 ** rng.uniform(-3, 0)
        perturbed = objective(alpha + scale * rng.normal(size=2), beta + scale * rng.normal(size=2))
        assert best <= perturbed + 1e-9


def test_stopping_thresholds_plug_in():
    eps_pri, eps_dual = stopping_thresholds(2, 1, ax_norm=1.0, z_norm=2.0, dual_norm_value=3.0,
                                            eps_abs=1e-4, eps_rel=1e-3)
    assert eps_pri == pytest.approx(2e-4 + 2e-3, rel=1e-12)
    assert eps_dual == pytest.approx(np.sqrt(3) * 1e-4 + 3e-3, rel=1e-12)


def test_stopping_check():
    assert stopping_check(0.0, 0.0, 0.0, 0.0)
    assert not stopping_check(1e-5, 1e-2, 1e-4, 1e-3)
    assert not stopping_check(1e-2, 1e-5, 1e-4, 1e-3)


def test_rho_update_rules():
    cfg = AdmmConfig()
    assert rho_update(1.5, 1.0, 1.0, cfg) == 1.5
    assert rho_update(1.5, 100.0, 1.0, cfg) == 3.0
    assert rho_update(1.5, 1.0, 100.0, cfg) == 0.75
    # 경계 μ 배에서는 유지
    assert rho_update(1.5, 10.0, 1.0, cfg) == 1.5


def test_augmented_lagrangian_ignores_rho_for_feasible_point():
    node, _ = random_node(seed=9)
    node.theta_i = node.alpha.copy()
    node.theta = node.beta.copy()
    assert augmented_lagrangian([node], 0.7, 2, 1.0) == augmented_lagrangian([node], 0.7, 2, 50.0)


def test_rho_change_keeps_multiplier_term_off_the_constraint():
    node, _ = random_node(seed=9)
    node.theta_i = node.alpha + np.array([0.5, -0.25])
    node.theta = node.beta - np.array([0.0, 1.0])
    residual_sq = 0.3125 + 1.0
    u, w = node.u.copy(), node.w.copy()

    before = augmented_lagrangian([node], 0.7, 2, 1.0)
    new_rho = rho_update(1.0, 100.0, 1.0, AdmmConfig())
    after = augmented_lagrangian([node], 0.7, 2, new_rho)
    # 비척도 승수 ν 를 그대로 두면 ρ 가 바뀌어도 ρ 에 무관한 부분(f + νᵀr)은 같다
    assert after - 0.5 * new_rho * residual_sq == pytest.approx(before - 0.5 * residual_sq, rel=1e-12)
    assert after - before == pytest.approx(0.5 * (new_rho - 1.0) * residual_sq, rel=1e-12)
    np.testing.assert_array_equal(node.u, u)
    np.testing.assert_array_equal(node.w, w)


def test_readout_uses_local_deviation():
    node, _ = random_node()
    node.theta = np.array([1.0, 1.0])
    node.alpha = np.array([2.0, 0.5])
    node.beta = np.array([1.5, 0.5])
    nominal, per_system = readout([node])
    np.testing.assert_array_equal(nominal, [1.0, 1.0])
    np.testing.assert_array_equal(per_system[0], [1.5, 1.0])


def test_single_node_recovers_least_squares():
    fleet = make_fleet(n_systems=1, anomalies=(), seed=2)
    solution = run_distributed(fleet, 1.0, 2, AdmmConfig(**TIGHT))
    expected = least_squares(fleet.systems[0])
    np.testing.assert_allclose(solution.nominal, expected, atol=1e-6)
    np.testing.assert_allclose(solution.per_system[0], expected, atol=1e-6)
    assert solution.flagged == ()


@pytest.mark.parametrize('p', [1, 2])
def test_matches_central_solver(p):
    fleet = make_fleet(n_systems=5, anomalies=(2,), seed=11)
    lam = 0.3 * compute_lambda_max(fleet, p)
    central = solve_group_lasso(fleet, SolverConfig(lam=lam, p=p))
    distributed = run_distributed(fleet, lam, p, AdmmConfig(**TIGHT))

    assert DetectionAnalyzer.sup_norm_agreement(central, distributed) <= 1e-4
    assert distributed.flagged == central.flagged == (2,)
    assert distributed.method == 'admm'
    assert distributed.diagnostics['messages_sent'] == distributed.diagnostics['iterations'] * fleet.n_systems


def test_default_rho_follows_gram_diagonal(planted_fleet):
    expected = 2.0 * np.mean([np.diag(system.gram) for system in planted_fleet.systems])
    assert default_rho(planted_fleet) == pytest.approx(expected, rel=1e-12)
    assert AdmmConfig().rho is None
    with pytest.raises(DomainError):
        AdmmConfig(rho=0.0)


def test_pooled_starting_point(planted_fleet):
    alphas, betas, duals = starting_point(planted_fleet, AdmmConfig())
    pooled = least_squares(planted_fleet)
    np.testing.assert_allclose(alphas, np.tile(pooled, (planted_fleet.n_systems, 1)), rtol=1e-12)
    np.testing.assert_array_equal(alphas, betas)
    # 통합 최소제곱의 정규방정식: Σ w_i = 0
    np.testing.assert_allclose(duals.sum(axis=0), 0.0, atol=1e-9 * np.abs(duals).max())
    lambda_max = compute_lambda_max(planted_fleet, 2)
    assert np.linalg.norm(duals, axis=1).max() == pytest.approx(lambda_max, rel=1e-10)

    cold = starting_point(planted_fleet, AdmmConfig(warm_start=False))
    for block in cold:
        np.testing.assert_array_equal(block, 0.0)


@pytest.mark.parametrize('p', [1, 2])
def test_warm_start_is_stationary_above_lambda_max(planted_fleet, p):
    lam = 1.01 * compute_lambda_max(planted_fleet, p)
    solution = run_distributed(planted_fleet, lam, p)
    assert solution.diagnostics['iterations'] == 1
    assert solution.flagged == ()
    np.testing.assert_allclose(solution.nominal, least_squares(planted_fleet), rtol=1e-8)


def test_cold_start_reaches_same_solution():
    fleet = make_fleet(n_systems=5, anomalies=(2,), seed=11)
    lam = 0.3 * compute_lambda_max(fleet, 2)
    warm = run_distributed(fleet, lam, 2, AdmmConfig(**TIGHT))
    cold = run_distributed(fleet, lam, 2, AdmmConfig(warm_start=False, rho=1.0, **TIGHT))
    assert cold.flagged == warm.flagged == (2,)
    assert DetectionAnalyzer.sup_norm_agreement(warm, cold) <= 1e-4
    assert cold.diagnostics['initial_rho'] == 1.0
    assert warm.diagnostics['initial_rho'] == pytest.approx(default_rho(fleet))


def test_start_from_central_solution_converges_immediately(planted_fleet):
    lam = 0.3 * compute_lambda_max(planted_fleet, 2)
    central = solve_group_lasso(planted_fleet, SolverConfig(lam=lam))
    solution = run_distributed(planted_fleet, lam, 2, initial=central)
    assert solution.diagnostics['iterations'] <= 3
    assert solution.flagged == central.flagged
    assert DetectionAnalyzer.sup_norm_agreement(central, solution) <= 1e-4


def test_trace_records_every_iteration(planted_fleet):
    lam = 0.3 * compute_lambda_max(planted_fleet, 2)
    solution = run_distributed(planted_fleet, lam, 2)
    trace = solution.diagnostics['trace']
    assert [row['iteration'] for row in trace] == list(range(1, solution.diagnostics['iterations'] + 1))
    last = trace[-1]
    assert last['primal_residual'] <= last['eps_pri']
    assert last['dual_residual'] <= last['eps_dual']


def test_threads_do_not_change_result(planted_fleet):
    lam = 0.3 * compute_lambda_max(planted_fleet, 2)
    sequential = run_distributed(planted_fleet, lam, 2, AdmmConfig())
    threaded = run_distributed(planted_fleet, lam, 2, AdmmConfig(threads=4))
    np.testing.assert_array_equal(sequential.per_system, threaded.per_system)
    np.testing.assert_array_equal(sequential.nominal, threaded.nominal)
    assert sequential.diagnostics['iterations'] == threaded.diagnostics['iterations']


def test_socket_transport_matches_in_process(planted_fleet):
    lam = 0.3 * compute_lambda_max(planted_fleet, 2)
    bus = run_distributed(planted_fleet, lam, 2, AdmmConfig(), transport=InProcessBus())
    socket_run = run_distributed(planted_fleet, lam, 2, AdmmConfig(threads=2),
                                 transport=LoopbackSocketTransport(timeout=10.0))
    np.testing.assert_array_equal(bus.per_system, socket_run.per_system)
    assert bus.diagnostics['messages_sent'] == socket_run.diagnostics['messages_sent']


class DroppingBus(InProcessBus):
    """반복 2에서 노드 1의 메시지를 버리는 버스"""

    def broadcast(self, message):
        if message.iteration == 2 and message.sender == 1:
            return
        super().broadcast(message)


def test_dropped_message_is_protocol_error(planted_fleet):
    with pytest.raises(ProtocolError):
        run_distributed(planted_fleet, 1.0, 2, AdmmConfig(), transport=DroppingBus())


def test_iteration_cap_reports_history(planted_fleet):
    cfg = AdmmConfig(max_iterations=2, eps_abs=1e-14, eps_rel=1e-14)
    with pytest.raises(NonConvergenceError) as error:
        run_distributed(planted_fleet, 1.0, 2, cfg)
    assert error.value.iterations == 2
    assert len(error.value.history) == 2
    nominal, per_system = error.value.last_iterate
    assert per_system.shape == (planted_fleet.n_systems, planted_fleet.dim)
