"""
티호노프(제곱 노름) 정규화 비교 기준 모듈

minimize Σ‖Y_i − Φ_iθ_i‖² + λΣ‖θ − θ_i‖₂²

정상 조건:
    (Φ_iᵀΦ_i + λI)θ_i = Φ_iᵀY_i + λθ,   Σ_i (θ_i − θ) = 0
M_i = (Φ_iᵀΦ_i + λI)⁻¹ 로 θ_i 를 소거하면 (Σ M_iΦ_iᵀΦ_i)θ = Σ M_iΦ_iᵀY_i 가 된다.
편차는 일반적으로 정확히 0이 되지 않으므로 판정에는 임계값이 필요하다.
"""
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from scipy import linalg

from fleet_anomaly.core import FleetDataset, Solution, deviation_norms, solve_normal_equations, total_sse
from fleet_anomaly.errors import DomainError

DEFAULT_THRESHOLD = 1e-8


def tikhonov_objective(fleet: FleetDataset, nominal: np.ndarray, per_system: np.ndarray, lam: float) -> float:
    deviations = per_system - nominal[np.newaxis, :]
    return total_sse(fleet, per_system) + lam * float(np.sum(deviations ** 2))


def solve_tikhonov(fleet: FleetDataset, lam: float, threshold: float = DEFAULT_THRESHOLD) -> Solution:
    """제곱 노름 융합 문제의 정확한 해 (판정은 threshold 로)"""
    if not lam >= 0:
        raise DomainError(f"lambda는 0 이상이어야 합니다: {lam}")
    if not threshold > 0:
        raise DomainError(f"임계값은 0보다 커야 합니다: {threshold}")
    dim = fleet.dim

    if lam == 0.0:
        per_system = np.stack([
            solve_normal_equations(system.gram, system.moment, subproblem=f"시스템 {tag} 개별 적합")
            for tag, system in enumerate(fleet.systems, 1)
        ])
        nominal = per_system.mean(axis=0)
    else:
        shifted_factors = [linalg.cho_factor(gram + lam * np.eye(dim), lower=True) for gram in fleet.grams]
        reduced_gram = np.zeros((dim, dim))
        reduced_moment = np.zeros(dim)
        for factor, gram, moment in zip(shifted_factors, fleet.grams, fleet.moments):
            reduced_gram += linalg.cho_solve(factor, gram)
            reduced_moment += linalg.cho_solve(factor, moment)
        # M_i 와 G_i 는 교환 가능하므로 축약 행렬은 대칭
        reduced_gram = 0.5 * (reduced_gram + reduced_gram.T)
        nominal = solve_normal_equations(reduced_gram, reduced_moment, subproblem="티호노프 공칭 파라미터")
        per_system = np.stack([
            linalg.cho_solve(factor, moment + lam * nominal)
            for factor, moment in zip(shifted_factors, fleet.moments)
        ])

    objective = tikhonov_objective(fleet, nominal, per_system, lam)
    return Solution.build(nominal=nominal, per_system=per_system, p=2, support_tolerance=threshold,
                          objective=objective, method='tikhonov', lam=lam,
                          diagnostics={'threshold': threshold})


@dataclass(frozen=True)
class ThresholdReport:
    """임계값 판정 결과와 여유 비율

    margin_ratio = 판정된 편차 중 최소 / 판정되지 않은 편차 중 최대
    (판정되지 않은 편차가 모두 0이거나 없으면 inf, 판정된 시스템이 없으면 0)
    """

    flagged: Tuple[int, ...]
    threshold: float
    smallest_flagged: float
    largest_unflagged: float
    margin_ratio: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'flagged': list(self.flagged),
            'threshold': self.threshold,
            'smallest_flagged': self.smallest_flagged,
            'largest_unflagged': self.largest_unflagged,
            'margin_ratio': self.margin_ratio if np.isfinite(self.margin_ratio) else None,
        }


def threshold_report(solution: Solution, threshold: float) -> ThresholdReport:
    """편차 노름이 threshold 를 넘는 시스템과 여유 비율"""
    if not threshold > 0:
        raise DomainError(f"임계값은 0보다 커야 합니다: {threshold}")
    deviations = deviation_norms(solution.per_system, solution.nominal, solution.p)
    above = deviations > threshold
    flagged = tuple(int(i) + 1 for i in np.flatnonzero(above))
    smallest_flagged = float(deviations[above].min()) if np.any(above) else 0.0
    largest_unflagged = float(deviations[~above].max()) if np.any(~above) else 0.0

    if not flagged:
        margin_ratio = 0.0
    elif largest_unflagged == 0.0:
        margin_ratio = float('inf')
    else:
        margin_ratio = smallest_flagged / largest_unflagged
    return ThresholdReport(flagged=flagged, threshold=float(threshold), smallest_flagged=smallest_flagged,
                           largest_unflagged=largest_unflagged, margin_ratio=margin_ratio)
