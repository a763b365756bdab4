"""
합-노름(sum-of-norms) 완화 문제의 중앙집중 블록 좌표 하강 솔버

minimize Σ‖Y_i − Φ_iθ_i‖² + λΣ‖θ − θ_i‖_p

편차 좌표 d_i = θ_i − θ 에서 블록별 정확 최소화를 반복한다.
    1. 중앙값 재중심화: θ_i 를 고정하고 θ 를 {θ_i} 의 (기하/좌표별) 중앙값으로 이동
    2. θ 단계: 통합 그람 행렬로 정확한 최소제곱
    3. d_i 단계: 단일 블록 그룹 라쏘를 정확히 풀이
각 단계가 정확한 블록 최소화이므로 목적함수는 단조 비증가한다.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from fleet_anomaly.config import SolverConfig, resolve_support_tolerance
from fleet_anomaly.core import (FleetDataset, Solution, deviation_norms, group_lasso_objective,
                                ridge_epsilon, solve_normal_equations, support_from_deviations)
from fleet_anomaly.errors import FleetAnomalyError, NonConvergenceError, SingularityError
from fleet_anomaly.prox import GramBlock, dual_norm, dual_order, group_lasso_block

MONOTONE_SLACK = 1e-12


def pooled_estimate(fleet: FleetDataset, ridge: bool = False) -> np.ndarray:
    """모든 시스템을 합친 최소제곱 θ*"""
    return solve_normal_equations(fleet.grams.sum(axis=0), fleet.moments.sum(axis=0), ridge=ridge,
                                  subproblem="통합 최소제곱")


def residual_gradients(fleet: FleetDataset, per_system: np.ndarray) -> np.ndarray:
    """g_i = 2Φ_iᵀ(Φ_iθ_i − Y_i) (N, m)"""
    return 2.0 * (np.einsum('ijk,ik->ij', fleet.grams, per_system) - fleet.moments)


def compute_lambda_max(fleet: FleetDataset, p: int, ridge: bool = False) -> float:
    """모든 θ_i 가 θ* 로 합쳐지는 가장 작은 λ: max_i ‖2Φ_iᵀ(Φ_iθ* − Y_i)‖_쌍대"""
    dual_order(p)
    theta_star = pooled_estimate(fleet, ridge=ridge)
    # d_i 단계의 융합 판정과 같은 연산 순서
    linear_terms = fleet.moments - fleet.grams @ theta_star
    return float(max(dual_norm(2.0 * linear, p) for linear in linear_terms))


def anomaly_support(solution: Solution, support_tolerance: float) -> Tuple[int, ...]:
    """{i : ‖θ̂_i − θ̂‖_p > support_tolerance} (번호는 1부터)"""
    return support_from_deviations(solution.deviations, support_tolerance)


def kkt_residual(fleet: FleetDataset, solution: Solution, cfg: SolverConfig) -> float:
    """볼록 문제의 부분미분 최적성 조건 최대 위반량"""
    lam, p = cfg.lam, cfg.p
    tolerance = solution.support_tolerance
    deviations = solution.per_system - solution.nominal[np.newaxis, :]
    gradients = residual_gradients(fleet, solution.per_system)
    
    violation = 0.0
    for deviation, gradient in zip(deviations, gradients):
        if p == 2:
            magnitude = float(np.linalg.norm(deviation))
            if magnitude > tolerance:
                block = float(np.max(np.abs(gradient + lam * deviation / magnitude)))
            else:
                block = max(float(np.linalg.norm(gradient)) - lam, 0.0)
        else:
            active = np.abs(deviation) > tolerance
            stationary = np.abs(gradient + lam * np.sign(deviation))
            bounded = np.maximum(np.abs(gradient) - lam, 0.0)
            block = float(np.max(np.where(active, stationary, bounded)))
        violation = max(violation, block)
    
    # 공칭 θ 정상성: Σ g_i = 0
    violation = max(violation, float(np.max(np.abs(gradients.sum(axis=0)))))
    return violation


def geometric_median(points: np.ndarray, start: np.ndarray, tolerance: float = 1e-13,
                     max_iterations: int = 500) -> np.ndarray:
    """Weiszfeld 반복 (일치점은 Vardi-Zhang 방식으로 처리)"""
    estimate = np.array(start, dtype=np.float64)
    for _ in range(max_iterations):
        differences = points - estimate[np.newaxis, :]
        distances = np.linalg.norm(differences, axis=1)
        coincident = distances <= 1e-12 * (1.0 + float(np.linalg.norm(estimate)))
        distinct = ~coincident
        if not np.any(distinct):
            return estimate
        weights = 1.0 / distances[distinct]
        weiszfeld = weights @ points[distinct] / weights.sum()
        n_coincident = int(coincident.sum())
        if n_coincident == 0:
            updated = weiszfeld
        else:
            pull = float(np.linalg.norm(weights @ differences[distinct]))
            if pull <= n_coincident:
                return estimate
            step = n_coincident / pull
            updated = (1.0 - step) * weiszfeld + step * estimate
        if np.linalg.norm(updated - estimate) <= tolerance * (1.0 + np.linalg.norm(estimate)):
            return updated
        estimate = updated
    return estimate


def norm_median(points: np.ndarray, start: np.ndarray, p: int) -> np.ndarray:
    """argmin_θ Σ‖θ − θ_i‖_p"""
    if p == 1:
        return np.median(points, axis=0)
    return geometric_median(points, start)


class GroupLassoBlockSolver:
    """블록 좌표 하강 풀이기"""
    
    def __init__(self, fleet: FleetDataset, cfg: SolverConfig):
        self.fleet = fleet
        self.cfg = cfg
        self.grams = fleet.grams.copy()
        self.moments = fleet.moments
        dimension = fleet.dim
        
        for position, gram in enumerate(self.grams):
            rank = int(np.linalg.matrix_rank(gram, hermitian=True))
            if rank < dimension:
                if not cfg.ridge:
                    raise SingularityError("시스템 그람 행렬이 특이합니다", rank=rank, dimension=dimension,
                                           subproblem=f"시스템 {position + 1} 블록")
                self.grams[position] = gram + ridge_epsilon(gram) * np.eye(dimension)
        
        pooled = self.grams.sum(axis=0)
        rank = int(np.linalg.matrix_rank(pooled, hermitian=True))
        if rank < dimension:
            raise SingularityError("통합 그람 행렬이 특이합니다", rank=rank, dimension=dimension,
                                   subproblem="θ 단계")
        self.pooled_factor = linalg.cho_factor(pooled, lower=True)
        self.blocks = [GramBlock(gram) for gram in self.grams]
    
    def theta_step(self, deviations: np.ndarray) -> np.ndarray:
        """θ = (ΣG_i)⁻¹ Σ(b_i − G_i d_i)"""
        rhs = self.moments.sum(axis=0) - np.einsum('ijk,ik->j', self.grams, deviations)
        return linalg.cho_solve(self.pooled_factor, rhs)
    
    def deviation_steps(self, theta: np.ndarray, deviations: np.ndarray,
                        executor: Optional[ThreadPoolExecutor]) -> np.ndarray:
        """d_i = argmin ‖(Y_i − Φ_iθ) − Φ_i d‖² + λ‖d‖_p"""
        linear_terms = self.moments - self.grams @ theta
        
        def step(position: int) -> np.ndarray:
            return group_lasso_block(self.blocks[position], linear_terms[position], self.cfg.lam,
                                     self.cfg.p, start=deviations[position],
                                     tolerance=self.cfg.inner_tolerance,
                                     max_sweeps=self.cfg.inner_max_iterations)
        
        positions = range(self.fleet.n_systems)
        if executor is not None:
            return np.stack(list(executor.map(step, positions)))
        return np.stack([step(position) for position in positions])
    
    def recenter(self, theta: np.ndarray, deviations: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """θ_i 를 고정한 채 θ 를 중앙값으로 이동 (벌점이 줄어들 때만 채택)"""
        p = self.cfg.p
        per_system = theta[np.newaxis, :] + deviations
        candidate = norm_median(per_system, theta, p)
        current_penalty = float(np.sum(np.linalg.norm(deviations, ord=p, axis=1)))
        candidate_deviations = per_system - candidate[np.newaxis, :]
        candidate_penalty = float(np.sum(np.linalg.norm(candidate_deviations, ord=p, axis=1)))
        if candidate_penalty < current_penalty * (1.0 - 1e-12):
            return candidate, candidate_deviations
        return theta, deviations


def _unpenalized_solution(fleet: FleetDataset, cfg: SolverConfig) -> Solution:
    """λ = 0: 시스템별 최소제곱, 공칭값은 관례상 평균"""
    per_system = np.stack([
        solve_normal_equations(system.gram, system.moment, ridge=cfg.ridge,
                               subproblem=f"시스템 {tag} 개별 적합")
        for tag, system in enumerate(fleet.systems, 1)
    ])
    nominal = per_system.mean(axis=0)
    objective = group_lasso_objective(fleet, nominal, per_system, 0.0, cfg.p)
    tolerance = resolve_support_tolerance(nominal, cfg.p, cfg.support_tolerance)
    solution = Solution.build(nominal=nominal, per_system=per_system, p=cfg.p, support_tolerance=tolerance,
                              objective=objective, method='central', lam=0.0,
                              diagnostics={'iterations': 0, 'objective_history': [objective]})
    solution.diagnostics['kkt_residual'] = kkt_residual(fleet, solution, cfg)
    return solution


def solve_group_lasso(fleet: FleetDataset, cfg: SolverConfig,
                      initial: Optional[Solution] = None) -> Solution:
    """합-노름 완화 문제를 KKT 허용오차까지 풀어서 Solution 반환"""
    if cfg.lam == 0.0:
        return _unpenalized_solution(fleet, cfg)
    
    solver = GroupLassoBlockSolver(fleet, cfg)
    if initial is not None:
        theta = np.array(initial.nominal, dtype=np.float64)
        deviations = initial.per_system - theta[np.newaxis, :]
    else:
        theta = solver.theta_step(np.zeros((fleet.n_systems, fleet.dim)))
        deviations = np.zeros((fleet.n_systems, fleet.dim))
    
    def objective_of(theta_value: np.ndarray, deviation_values: np.ndarray) -> float:
        return group_lasso_objective(fleet, theta_value, theta_value[np.newaxis, :] + deviation_values,
                                     cfg.lam, cfg.p)
    
    def build(theta_value, deviation_values, objective, iterations, history, kkt) -> Solution:
        per_system = theta_value[np.newaxis, :] + deviation_values
        tolerance = resolve_support_tolerance(theta_value, cfg.p, cfg.support_tolerance)
        return Solution.build(nominal=theta_value, per_system=per_system, p=cfg.p,
                              support_tolerance=tolerance, objective=objective, method='central',
                              lam=cfg.lam, diagnostics={'iterations': iterations, 'kkt_residual': kkt,
                                                        'objective_history': history})
    
    objective = objective_of(theta, deviations)
    history: List[float] = [objective]
    kkt = float('inf')
    executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for iteration in range(1, cfg.max_iterations + 1):
            theta, deviations = solver.recenter(theta, deviations)
            theta = solver.theta_step(deviations)
            deviations = solver.deviation_steps(theta, deviations, executor)
            
            previous = objective
            objective = objective_of(theta, deviations)
            history.append(objective)
            if objective > previous * (1.0 + MONOTONE_SLACK) + MONOTONE_SLACK:
                raise FleetAnomalyError(
                    f"목적함수가 증가했습니다: {previous:.17g} → {objective:.17g} (반복 {iteration})"
                )
            
            if cfg.verbose and iteration % 100 == 0:
                print(f"  [{iteration:5d}] 목적함수 {objective:.10g}")
            
            relative_decrease = (previous - objective) / max(abs(previous), 1.0)
            if relative_decrease < cfg.objective_tolerance:
                candidate = build(theta, deviations, objective, iteration, history, None)
                kkt = kkt_residual(fleet, candidate, cfg)
                if kkt < cfg.kkt_tolerance:
                    candidate.diagnostics['kkt_residual'] = kkt
                    if cfg.verbose:
                        print(f"✅ 수렴: 반복 {iteration}회, KKT 잔차 {kkt:.3e}")
                    return candidate
    finally:
        if executor is not None:
            executor.shutdown()
    
    last = build(theta, deviations, objective, cfg.max_iterations, history, kkt)
    raise NonConvergenceError("블록 좌표 하강이 허용오차에 도달하지 못했습니다",
                              iterations=cfg.max_iterations,
                              residual=kkt_residual(fleet, last, cfg), last_iterate=last,
                              history=[{'iteration': i, 'objective': value} for i, value in enumerate(history)])
