"""
정규화 파라미터 λ 선택 모듈

- λ_max 를 상한으로 한 이분 탐색으로 정확히 k개를 판정하는 λ 찾기
- λ 격자에서 BIC 최소화
- 정상 시스템 묶음으로 λ 보정
"""
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fleet_anomaly.config import SolverConfig
from fleet_anomaly.core import FleetDataset, Solution, total_sse
from fleet_anomaly.errors import DomainError, FleetAnomalyError
from fleet_anomaly.solver import compute_lambda_max, solve_group_lasso

MAX_BISECTION_DEPTH = 60
LOWER_BRACKET_FLOOR = 1e-12
# k = 0 에서 λ_max 경계의 반올림 차이를 피하기 위한 여유
FUSION_MARGIN = 1e-9


@dataclass(eq=False)
class TuningResult:
    """목표 개수 탐색 결과"""

    lam: float
    solution: Solution
    k_target: int
    achieved_k: int
    lambda_max: float
    evaluations: int

    @property
    def exact(self) -> bool:
        return self.achieved_k == self.k_target


def log_lambda_grid(lambda_max: float, n_points: int = 20, ratio: float = 1e-3) -> np.ndarray:
    """λ_max 부터 ratio·λ_max 까지 로그 간격 격자 (내림차순)"""
    if not lambda_max > 0:
        raise DomainError(f"lambda_max는 0보다 커야 합니다: {lambda_max}")
    if n_points < 1:
        raise DomainError(f"격자 점 수는 1 이상이어야 합니다: {n_points}")
    if not 0 < ratio < 1:
        raise DomainError(f"ratio는 0과 1 사이여야 합니다: {ratio}")
    return np.geomspace(lambda_max, lambda_max * ratio, n_points)


def calibrate_lambda(normal_fleet: FleetDataset, p: int = 2, omega: float = 1.5, ridge: bool = False) -> float:
    """정상으로 알려진 시스템 묶음의 λ_max 에 여유 배수 ω 를 곱한 탐지용 λ"""
    if not omega > 0:
        raise DomainError(f"omega는 0보다 커야 합니다: {omega}")
    return omega * compute_lambda_max(normal_fleet, p, ridge=ridge)


def tune_lambda_for_k(fleet: FleetDataset, k_target: int, cfg: SolverConfig,
                      max_depth: int = MAX_BISECTION_DEPTH) -> TuningResult:
    """정확히 k_target 개를 판정하는 λ 를 (0, λ_max] 에서 이분 탐색

    판정 개수가 λ 에 대해 단조가 아닐 수 있으므로 정확한 개수를 찾지 못하면
    가장 가까운 개수(동률이면 더 작은 개수)의 λ 를 경고와 함께 반환한다.
    """
    n_systems = fleet.n_systems
    if not 0 <= k_target <= n_systems:
        raise DomainError(f"k_target은 0 이상 N({n_systems}) 이하여야 합니다: {k_target}")

    lambda_max = compute_lambda_max(fleet, cfg.p, ridge=cfg.ridge)
    evaluated: List[Tuple[float, Solution]] = []

    def evaluate(lam: float, initial: Optional[Solution]) -> int:
        solution = solve_group_lasso(fleet, cfg.with_lambda(lam), initial=initial)
        evaluated.append((lam, solution))
        if cfg.verbose:
            print(f"  λ={lam:.6g} → 판정 {len(solution.flagged)}개")
        return len(solution.flagged)

    def result(lam: float, solution: Solution) -> TuningResult:
        return TuningResult(lam=lam, solution=solution, k_target=k_target, achieved_k=len(solution.flagged),
                            lambda_max=lambda_max, evaluations=len(evaluated))

    upper = lambda_max * (1.0 + FUSION_MARGIN)
    if evaluate(upper, None) == k_target or lambda_max == 0.0:
        lam, solution = evaluated[-1]
        if k_target != 0:
            warnings.warn(f"λ_max = 0 이므로 {k_target}개를 판정할 수 없습니다")
        return result(lam, solution)

    # 하한: count(lower) ≥ k_target 이 될 때까지 절반씩
    lower = lambda_max
    while True:
        lower *= 0.5
        count = evaluate(lower, evaluated[-1][1])
        if count == k_target:
            return result(*evaluated[-1])
        if count > k_target or lower <= lambda_max * LOWER_BRACKET_FLOOR:
            break

    if count > k_target:
        for _ in range(max_depth):
            middle = float(np.sqrt(lower * upper))
            if not lower < middle < upper:
                break
            nearest = min(evaluated, key=lambda item: abs(np.log(item[0] / middle)))[1]
            count = evaluate(middle, nearest)
            if count == k_target:
                return result(*evaluated[-1])
            if count > k_target:
                lower = middle
            else:
                upper = middle

    # 가장 가까운 개수, 동률이면 더 작은 개수, 그다음 더 큰 λ
    lam, solution = min(evaluated, key=lambda item: (abs(len(item[1].flagged) - k_target),
                                                     len(item[1].flagged), -item[0]))
    warnings.warn(f"정확히 {k_target}개를 판정하는 λ 를 찾지 못했습니다. "
                  f"가장 가까운 {len(solution.flagged)}개(λ={lam:.6g})를 사용합니다")
    return result(lam, solution)


def bic_score(fleet: FleetDataset, solution: Solution) -> float:
    """BIC = n·log(SSE/n) + df·log(n),  n = 전체 관측 수, df = m·(1 + 판정 수)"""
    n = fleet.total_observations
    sse = total_sse(fleet, solution.per_system)
    df = fleet.dim * (1 + len(solution.flagged))
    if sse <= 0.0:
        warnings.warn("잔차제곱합이 0이므로 BIC 를 -inf 로 둡니다")
        return float('-inf')
    return float(n * np.log(sse / n) + df * np.log(n))


def select_lambda_bic(fleet: FleetDataset, grid: Sequence[float], cfg: SolverConfig) -> Tuple[float, pd.DataFrame]:
    """격자의 각 λ 에서 풀고(큰 λ 부터 웜 스타트) BIC 최소 λ 와 전체 표 반환

    실패한 격자점은 건너뛰고 status 열에 기록한다.
    """
    values = np.asarray(list(grid), dtype=np.float64)
    if values.size == 0:
        raise DomainError("λ 격자가 비어 있습니다")
    if not np.all(values > 0) or not np.all(np.isfinite(values)):
        raise DomainError("λ 격자 값은 0보다 큰 유한값이어야 합니다")
    unique = np.unique(values)[::-1]

    rows = []
    previous: Optional[Solution] = None
    for lam in unique:
        try:
            solution = solve_group_lasso(fleet, cfg.with_lambda(float(lam)), initial=previous)
        except FleetAnomalyError as error:
            warnings.warn(f"λ={lam:.6g} 풀이 실패로 건너뜁니다: {error}")
            rows.append({'lambda': float(lam), 'k': np.nan, 'flagged': '', 'sse': np.nan, 'bic': np.nan,
                         'status': f'failed: {type(error).__name__}'})
            continue
        previous = solution
        rows.append({
            'lambda': float(lam),
            'k': len(solution.flagged),
            'flagged': ';'.join(str(tag) for tag in solution.flagged),
            'sse': total_sse(fleet, solution.per_system),
            'bic': bic_score(fleet, solution),
            'status': 'ok',
        })
        if cfg.verbose:
            print(f"  λ={lam:.6g} k={rows[-1]['k']} BIC={rows[-1]['bic']:.6g}")

    table = pd.DataFrame(rows, columns=['lambda', 'k', 'flagged', 'sse', 'bic', 'status'])
    solved = table[table['status'] == 'ok']
    if solved.empty:
        raise FleetAnomalyError("모든 λ 격자점에서 풀이에 실패했습니다")
    # 동률이면 더 큰 λ (표가 내림차순이므로 첫 번째)
    best_lambda = float(solved.loc[solved['bic'].idxmin(), 'lambda'])
    return best_lambda, table
