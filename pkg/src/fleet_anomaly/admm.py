"""
분산 ADMM 솔버

각 시스템(노드)은 자기 데이터만 가지고 다음을 반복한다.
    1. θ_i = α_i − u_i/ρ
    2. (β_i, w_i) 브로드캐스트
    3. θ = (1/N) Σ_j (β_j − w_j/ρ)   (모든 노드가 같은 순서로 중복 계산)
    4. 로컬 하위 문제로 (α_i, β_i) 갱신
    5. u_i += ρ(θ_i − α_i),  w_i += ρ(θ − β_i)

승수 u_i, w_i 는 스케일되지 않은 값(ν)으로 저장하므로 ρ 가 바뀌어도 그대로 둔다.
기본 시작점은 통합 최소제곱 θ* 와 w_i = 2(G_iθ* − b_i) 이다 (λ ≥ λ_max 이면 이미 정상점).
θ* 를 얻으려면 시작 전에 (G_i, b_i) 합을 한 번 모아야 하며, 이 집계는 반복 메시지 수에 넣지 않는다.
제약 행렬 A 는 만들지 않는다. A 의 작용(α 블록 복사, β 블록 평균)은 각 단계에 직접 들어 있다.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from fleet_anomaly.config import AdmmConfig, resolve_support_tolerance
from fleet_anomaly.core import FleetDataset, Solution, SystemDataset, group_lasso_objective
from fleet_anomaly.errors import NonConvergenceError, ProtocolError
from fleet_anomaly.prox import alternating_local_solve
from fleet_anomaly.solver import pooled_estimate
from fleet_anomaly.transports.base_transport import BaseTransport
from fleet_anomaly.transports.frame import BroadcastMessage
from fleet_anomaly.transports.in_process_bus import InProcessBus


@dataclass(eq=False)
class AdmmNodeState:
    """노드 i 의 로컬 상태 (index 는 0부터의 배열 위치)"""

    index: int
    data: SystemDataset
    rho: float
    alpha: np.ndarray
    beta: np.ndarray
    u: np.ndarray
    w: np.ndarray
    theta_i: np.ndarray
    theta: np.ndarray
    _factor_rho: Optional[float] = field(default=None, repr=False)
    _factor: Any = field(default=None, repr=False)

    @classmethod
    def initialize(cls, index: int, data: SystemDataset, rho: float,
                   alpha: Optional[np.ndarray] = None, beta: Optional[np.ndarray] = None,
                   w: Optional[np.ndarray] = None) -> "AdmmNodeState":
        """u = 0, 지정하지 않은 α, β, w 는 0 으로 시작 (θ_i = α, θ = β)"""
        dim = data.dim
        alpha = np.zeros(dim) if alpha is None else np.array(alpha, dtype=np.float64)
        beta = np.zeros(dim) if beta is None else np.array(beta, dtype=np.float64)
        w = np.zeros(dim) if w is None else np.array(w, dtype=np.float64)
        return cls(index=index, data=data, rho=float(rho), alpha=alpha, beta=beta,
                   u=np.zeros(dim), w=w, theta_i=alpha.copy(), theta=beta.copy())

    @property
    def tag(self) -> int:
        return self.index + 1

    def factor_solve(self) -> Callable[[np.ndarray], np.ndarray]:
        """(2Φᵀ Φ + 2ρI)x = rhs 풀이 함수 (ρ 가 바뀔 때만 다시 분해)"""
        if self._factor_rho != self.rho:
            matrix = 2.0 * self.data.gram + 2.0 * self.rho * np.eye(self.data.dim)
            self._factor = linalg.cho_factor(matrix, lower=True)
            self._factor_rho = self.rho
        factor = self._factor
        return lambda rhs: linalg.cho_solve(factor, rhs)

    def message(self, iteration: int) -> BroadcastMessage:
        return BroadcastMessage(iteration=iteration, sender=self.index, beta=self.beta.copy(), w=self.w.copy())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(vector))
                   for vector in (self.alpha, self.beta, self.u, self.w, self.theta_i, self.theta))


def local_primal_update(node: AdmmNodeState) -> np.ndarray:
    """θ_i ← α_i − u_i/ρ"""
    node.theta_i = node.alpha - node.u / node.rho
    return node.theta_i


def consensus_update(received: Sequence[BroadcastMessage], rho: float, n_nodes: int) -> np.ndarray:
    """θ = (1/N) Σ (β_j − w_j/ρ), 보낸 노드 순서대로 합산"""
    by_sender: Dict[int, BroadcastMessage] = {}
    for message in received:
        if message.sender in by_sender:
            raise ProtocolError("중복 메시지", node=message.sender)
        by_sender[message.sender] = message
    for sender in range(n_nodes):
        if sender not in by_sender:
            raise ProtocolError("메시지가 누락되었습니다", node=sender)
    if len(by_sender) != n_nodes:
        extra = sorted(set(by_sender) - set(range(n_nodes)))
        raise ProtocolError("알 수 없는 노드의 메시지", node=extra[0])

    total = np.zeros_like(by_sender[0].beta)
    for sender in range(n_nodes):
        message = by_sender[sender]
        total = total + (message.beta - message.w / rho)
    return total / n_nodes


def local_subproblem(node: AdmmNodeState, theta_i: np.ndarray, theta: np.ndarray, lam: float, p: int,
                     rho: float, inner_tolerance: float = 1e-10,
                     inner_max_iterations: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """argmin ‖Y_i − Φ_iα‖² + λ‖β − α‖_p − u_iᵀα − w_iᵀβ + (ρ/2)‖θ_i − α‖² + (ρ/2)‖θ − β‖²

    δ = β − α 로 바꿔 α 의 이차 풀이와 δ 의 근접 연산을 교대한다.
    """
    if node.rho != rho:
        node.rho = rho
    base_rhs = 2.0 * node.data.moment + node.u + node.w + rho * theta_i + rho * theta
    anchor = theta + node.w / rho
    try:
        alpha, delta, _ = alternating_local_solve(node.factor_solve(), base_rhs, anchor,
                                                  node.beta - node.alpha, lam, rho, p,
                                                  inner_tolerance, inner_max_iterations)
    except NonConvergenceError as error:
        raise NonConvergenceError(f"노드 {node.tag} 로컬 하위 문제가 수렴하지 않았습니다",
                                  iterations=error.iterations, residual=error.residual,
                                  last_iterate=error.last_iterate)
    return alpha, alpha + delta


def dual_update(node: AdmmNodeState, theta_i: np.ndarray, theta: np.ndarray, alpha: np.ndarray,
                beta: np.ndarray, rho: float) -> Tuple[np.ndarray, np.ndarray]:
    """u_i += ρ(θ_i − α_i),  w_i += ρ(θ − β_i)"""
    node.u = node.u + rho * (theta_i - alpha)
    node.w = node.w + rho * (theta - beta)
    return node.u, node.w


def stopping_thresholds(n_nodes: int, dim: int, ax_norm: float, z_norm: float, dual_norm_value: float,
                        eps_abs: float, eps_rel: float) -> Tuple[float, float]:
    """ε_pri = √(2Nm)·ε_abs + ε_rel·max(‖Ax‖, ‖z‖),  ε_dual = √((N+1)m)·ε_abs + ε_rel·‖Aᵀν‖"""
    eps_pri = np.sqrt(2 * n_nodes * dim) * eps_abs + eps_rel * max(ax_norm, z_norm)
    eps_dual = np.sqrt((n_nodes + 1) * dim) * eps_abs + eps_rel * dual_norm_value
    return float(eps_pri), float(eps_dual)


def stopping_check(primal_residual: float, dual_residual: float, eps_pri: float, eps_dual: float) -> bool:
    """두 잔차가 모두 임계값 이하이면 종료"""
    return primal_residual <= eps_pri and dual_residual <= eps_dual


def rho_update(rho: float, primal_residual: float, dual_residual: float, cfg: AdmmConfig) -> float:
    """‖r‖ > μ‖s‖ 이면 ρ·τ_incr, ‖s‖ > μ‖r‖ 이면 ρ/τ_decr"""
    if primal_residual > cfg.mu * dual_residual:
        return rho * cfg.tau_incr
    if dual_residual > cfg.mu * primal_residual:
        return rho / cfg.tau_decr
    return rho


def augmented_lagrangian(nodes: Sequence[AdmmNodeState], lam: float, p: int, rho: float) -> float:
    """L_ρ(x, z, ν) = Σ‖Y_i − Φ_iα_i‖² + λ‖β_i − α_i‖_p + νᵀ(Ax − z) + (ρ/2)‖Ax − z‖²"""
    value = 0.0
    for node in nodes:
        residual = node.data.measurements - node.data.regressors @ node.alpha
        value += float(residual @ residual) + lam * float(np.linalg.norm(node.beta - node.alpha, ord=p))
        primal_alpha = node.theta_i - node.alpha
        primal_beta = node.theta - node.beta
        value += float(node.u @ primal_alpha + node.w @ primal_beta)
        value += 0.5 * rho * float(primal_alpha @ primal_alpha + primal_beta @ primal_beta)
    return value


def readout(nodes: Sequence[AdmmNodeState]) -> Tuple[np.ndarray, np.ndarray]:
    """θ̂ = 합의 θ,  θ̂_i = θ̂ + (α_i − β_i)"""
    nominal = nodes[0].theta.copy()
    per_system = np.stack([nominal + (node.alpha - node.beta) for node in nodes])
    return nominal, per_system


class _NodeRunner:
    """노드별 작업을 순차 또는 스레드 풀로 실행 (map 종료가 곧 장벽)"""

    def __init__(self, threads: int):
        self.executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def map(self, function, nodes):
        if self.executor is None:
            return [function(node) for node in nodes]
        return list(self.executor.map(function, nodes))

    def close(self):
        if self.executor is not None:
            self.executor.shutdown()


def default_rho(fleet: FleetDataset) -> float:
    """2G_i 대각 원소의 전체 평균 (데이터 규모에 맞춘 ρ 시작값)"""
    diagonal_mean = float(np.mean(np.diagonal(fleet.grams, axis1=1, axis2=2)))
    return 2.0 * diagonal_mean if diagonal_mean > 0 else 1.0


def starting_point(fleet: FleetDataset, cfg: AdmmConfig,
                   initial: Optional[Solution] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """노드별 시작 (α, β, w)

    initial 이 있으면 α_i = θ̂_i, β_i = θ̂, warm_start 이면 α_i = β_i = θ*, 둘 다 아니면 0.
    w_i = 2(G_iα_i − b_i) 는 u = 0 일 때 로컬 하위 문제의 정상점 조건을 맞춘다.
    """
    n_nodes, dim = fleet.n_systems, fleet.dim
    if initial is not None:
        alphas = np.array(initial.per_system, dtype=np.float64)
        betas = np.tile(np.asarray(initial.nominal, dtype=np.float64), (n_nodes, 1))
    elif cfg.warm_start:
        theta_star = pooled_estimate(fleet, ridge=True)
        alphas = np.tile(theta_star, (n_nodes, 1))
        betas = alphas.copy()
    else:
        zeros = np.zeros((n_nodes, dim))
        return zeros, zeros.copy(), zeros.copy()
    duals = 2.0 * (np.einsum('ijk,ik->ij', fleet.grams, alphas) - fleet.moments)
    return alphas, betas, duals


def run_distributed(fleet: FleetDataset, lam: float, p: int, cfg: Optional[AdmmConfig] = None,
                    transport: Optional[BaseTransport] = None,
                    initial: Optional[Solution] = None) -> Solution:
    """N개 노드 상태 기계를 전송 계층 위에서 돌려 합-노름 문제의 해를 구한다"""
    cfg = cfg or AdmmConfig()
    n_nodes, dim = fleet.n_systems, fleet.dim
    rho = cfg.rho if cfg.rho is not None else default_rho(fleet)
    initial_rho = rho
    alphas, betas, duals = starting_point(fleet, cfg, initial)
    nodes = [
        AdmmNodeState.initialize(position, system, rho, alpha=alphas[position], beta=betas[position],
                                 w=duals[position])
        for position, system in enumerate(fleet.systems)
    ]
    transport = transport or InProcessBus()
    transport.open(n_nodes, dim)
    runner = _NodeRunner(cfg.threads)
    if cfg.verbose:
        start = '초기값 지정' if initial is not None else ('통합 최소제곱' if cfg.warm_start else '0')
        print(f"[ADMM] N={n_nodes}, ρ₀={rho:.4g}, 시작점: {start}")
    trace: List[Dict[str, Any]] = []

    def broadcast_phase(iteration: int):
        def work(node: AdmmNodeState):
            local_primal_update(node)
            transport.broadcast(node.message(iteration))
        return work

    def consensus_phase(iteration: int):
        def work(node: AdmmNodeState):
            node.theta = consensus_update(transport.collect(iteration), node.rho, n_nodes)
        return work

    def local_phase(node: AdmmNodeState):
        previous = (node.alpha, node.beta)
        alpha, beta = local_subproblem(node, node.theta_i, node.theta, lam, p, node.rho,
                                       cfg.inner_tolerance, cfg.inner_max_iterations)
        node.alpha, node.beta = alpha, beta
        dual_update(node, node.theta_i, node.theta, alpha, beta, node.rho)
        return previous

    try:
        for iteration in range(1, cfg.max_iterations + 1):
            runner.map(broadcast_phase(iteration), nodes)
            if transport.messages_sent != iteration * n_nodes:
                raise ProtocolError(f"반복 {iteration}까지 메시지 {transport.messages_sent}개 "
                                    f"(기대값 {iteration * n_nodes}개)")

            runner.map(consensus_phase(iteration), nodes)
            reference = nodes[0].theta
            for node in nodes[1:]:
                if not np.array_equal(node.theta, reference):
                    raise ProtocolError("노드마다 계산한 합의값 θ 가 다릅니다", node=node.index)

            previous = runner.map(local_phase, nodes)
            for node in nodes:
                if not node.is_finite():
                    raise NonConvergenceError(f"노드 {node.tag} 상태에 유한하지 않은 값이 생겼습니다",
                                              iterations=iteration, residual=float('inf'), history=trace)

            primal = np.sqrt(sum(float(np.sum((node.theta_i - node.alpha) ** 2)
                                       + np.sum((node.theta - node.beta) ** 2)) for node in nodes))
            alpha_change = sum(float(np.sum((node.alpha - old_alpha) ** 2))
                               for node, (old_alpha, _) in zip(nodes, previous))
            beta_change = np.zeros(dim)
            for node, (_, old_beta) in zip(nodes, previous):
                beta_change = beta_change + (node.beta - old_beta)
            dual = rho * np.sqrt(alpha_change + float(beta_change @ beta_change))

            ax_norm = np.sqrt(sum(float(node.theta_i @ node.theta_i) for node in nodes)
                              + n_nodes * float(reference @ reference))
            z_norm = np.sqrt(sum(float(node.alpha @ node.alpha + node.beta @ node.beta) for node in nodes))
            w_total = np.zeros(dim)
            for node in nodes:
                w_total = w_total + node.w
            dual_norm_value = np.sqrt(sum(float(node.u @ node.u) for node in nodes) + float(w_total @ w_total))
            eps_pri, eps_dual = stopping_thresholds(n_nodes, dim, ax_norm, z_norm, dual_norm_value,
                                                    cfg.eps_abs, cfg.eps_rel)

            nominal, per_system = readout(nodes)
            objective = group_lasso_objective(fleet, nominal, per_system, lam, p)
            support_tolerance = resolve_support_tolerance(nominal, p, cfg.support_tolerance)
            flagged = [i + 1 for i, deviation in enumerate(np.linalg.norm(per_system - nominal, ord=p, axis=1))
                       if deviation > support_tolerance]
            trace.append({
                'iteration': iteration,
                'primal_residual': float(primal),
                'dual_residual': float(dual),
                'eps_pri': eps_pri,
                'eps_dual': eps_dual,
                'rho': rho,
                'objective': objective,
                'n_flagged': len(flagged),
                'flagged': ';'.join(str(tag) for tag in flagged),
            })
            if cfg.verbose:
                print(f"  [{iteration:4d}] r={primal:.3e} s={dual:.3e} ρ={rho:.4g} 목적함수={objective:.10g}")

            if stopping_check(primal, dual, eps_pri, eps_dual):
                if cfg.verbose:
                    print(f"✅ ADMM 수렴: 반복 {iteration}회")
                return Solution.build(
                    nominal=nominal, per_system=per_system, p=p, support_tolerance=support_tolerance,
                    objective=objective, method='admm', lam=lam,
                    diagnostics={'iterations': iteration, 'primal_residual': float(primal),
                                 'dual_residual': float(dual), 'rho': rho,
                                 'messages_sent': transport.messages_sent, 'initial_rho': initial_rho,
                                 'trace': trace},
                )

            if cfg.adaptive_rho:
                new_rho = rho_update(rho, primal, dual, cfg)
                if new_rho != rho:
                    rho = new_rho
                    for node in nodes:
                        node.rho = rho
    finally:
        runner.close()
        transport.close()

    nominal, per_system = readout(nodes)
    last = trace[-1] if trace else {}
    raise NonConvergenceError("ADMM 이 반복 상한에 도달했습니다", iterations=cfg.max_iterations,
                              residual=float(last.get('primal_residual', float('inf'))),
                              last_iterate=(nominal, per_system), history=trace)
