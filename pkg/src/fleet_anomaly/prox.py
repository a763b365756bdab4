"""
노름, 근접 연산자(soft threshold)와 단일 블록 그룹 라쏘 풀이 모듈
"""
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from fleet_anomaly.errors import DomainError, NonConvergenceError


def dual_order(p: int) -> float:
    """‖·‖_p 의 쌍대 노름 차수 (p=1 → ∞, p=2 → 2)"""
    if p == 1:
        return np.inf
    if p == 2:
        return 2
    raise DomainError(f"p는 1 또는 2여야 합니다: {p}")


def dual_norm(vector: np.ndarray, p: int) -> float:
    return float(np.linalg.norm(vector, ord=dual_order(p)))


def soft_threshold(vector: np.ndarray, threshold: float) -> np.ndarray:
    """원소별 soft threshold (ℓ1 근접 연산자)"""
    return np.sign(vector) * np.maximum(np.abs(vector) - threshold, 0.0)


def block_soft_threshold(vector: np.ndarray, threshold: float) -> np.ndarray:
    """블록 soft threshold (ℓ2 근접 연산자)"""
    magnitude = float(np.linalg.norm(vector))
    if magnitude <= threshold:
        return np.zeros_like(vector)
    return (1.0 - threshold / magnitude) * vector


def prox_norm(vector: np.ndarray, threshold: float, p: int) -> np.ndarray:
    """argmin_x threshold·‖x‖_p + ½‖x − vector‖²"""
    if p == 1:
        return soft_threshold(vector, threshold)
    if p == 2:
        return block_soft_threshold(vector, threshold)
    raise DomainError(f"p는 1 또는 2여야 합니다: {p}")


class GramBlock:
    """단일 시스템 그람 행렬의 고유분해 캐시"""
    
    def __init__(self, gram: np.ndarray):
        self.gram = np.asarray(gram, dtype=np.float64)
        eigenvalues, eigenvectors = np.linalg.eigh(self.gram)
        self.eigenvalues = np.maximum(eigenvalues, 0.0)
        self.eigenvectors = eigenvectors
        self.diagonal = np.diag(self.gram).copy()


def _secular_block(block: GramBlock, linear: np.ndarray, lam: float) -> np.ndarray:
    """p=2 블록: 2Gd − 2c + λd/‖d‖ = 0 을 η = λ/‖d‖ 에 대한 단조 방정식으로 정확히 푼다"""
    z = block.eigenvectors.T @ (2.0 * linear)
    scale = 2.0 * block.eigenvalues
    z_norm = float(np.linalg.norm(z))
    
    def excess(eta: float) -> float:
        return eta * float(np.linalg.norm(z / (scale + eta))) - lam
    
    upper = float(scale.max()) * lam / (z_norm - lam) + lam
    while excess(upper) < 0.0:
        upper *= 2.0
    eta = brentq(excess, 0.0, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return block.eigenvectors @ (z / (scale + eta))


def _lasso_block(block: GramBlock, linear: np.ndarray, lam: float,
                 start: Optional[np.ndarray], tolerance: float, max_sweeps: int) -> np.ndarray:
    """p=1 블록: 좌표하강법"""
    gram = block.gram
    d = np.zeros_like(linear) if start is None else np.array(start, dtype=np.float64)
    for sweep in range(1, max_sweeps + 1):
        largest_change = 0.0
        for q in range(d.shape[0]):
            partial = linear[q] - gram[q] @ d + gram[q, q] * d[q]
            updated = np.sign(partial) * max(abs(partial) - lam / 2.0, 0.0) / gram[q, q]
            largest_change = max(largest_change, abs(updated - d[q]))
            d[q] = updated
        if largest_change <= tolerance * (1.0 + float(np.max(np.abs(d)))):
            return d
    raise NonConvergenceError("ℓ1 블록 좌표하강이 수렴하지 않았습니다", iterations=max_sweeps,
                              residual=largest_change, last_iterate=d)


def group_lasso_block(block: GramBlock, linear: np.ndarray, lam: float, p: int,
                      start: Optional[np.ndarray] = None, tolerance: float = 1e-12,
                      max_sweeps: int = 10000) -> np.ndarray:
    """argmin_d dᵀGd − 2cᵀd + λ‖d‖_p (G 양의 정부호 가정)"""
    linear = np.asarray(linear, dtype=np.float64)
    if dual_norm(2.0 * linear, p) <= lam:
        return np.zeros_like(linear)
    if lam == 0.0:
        return np.linalg.solve(block.gram, linear)
    if p == 2:
        return _secular_block(block, linear, lam)
    return _lasso_block(block, linear, lam, start, tolerance, max_sweeps)


def alternating_local_solve(factor_solve, base_rhs: np.ndarray, anchor: np.ndarray,
                            delta: np.ndarray, lam: float, rho: float, p: int,
                            tolerance: float, max_iterations: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """(α, δ) 교대 최소화

    α 단계: (2G + 2ρI)α = base_rhs − ρδ  (base_rhs 에 2Φᵀ Y, 승수, ρθ_i, ρθ 포함)
    δ 단계: δ = prox_{(λ/ρ)‖·‖}(anchor − α)  (anchor = θ + w/ρ)
    반환: (α, δ, 반복 수)
    """
    alpha = factor_solve(base_rhs - rho * delta)
    for iteration in range(1, max_iterations + 1):
        new_delta = prox_norm(anchor - alpha, lam / rho, p)
        new_alpha = factor_solve(base_rhs - rho * new_delta)
        change = max(float(np.max(np.abs(new_alpha - alpha))), float(np.max(np.abs(new_delta - delta))))
        alpha, delta = new_alpha, new_delta
        if change <= tolerance * (1.0 + float(np.max(np.abs(alpha)))):
            return alpha, delta, iteration
    raise NonConvergenceError("로컬 하위 문제 교대 최소화가 수렴하지 않았습니다",
                              iterations=max_iterations, residual=change,
                              last_iterate=(alpha, delta))
