"""
다중 가설 문제의 전수 탐색 풀이 모듈 (작은 N 에서의 기준해)
"""
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fleet_anomaly.config import resolve_support_tolerance
from fleet_anomaly.core import (FleetDataset, Hypothesis, Solution, binomial_count,
                                group_lasso_objective, solve_normal_equations)
from fleet_anomaly.errors import DomainError, EnumerationCapError

DEFAULT_ENUMERATION_CAP = 10 ** 6
DEFAULT_REPORT_TOP = 10


class GramCache:
    """시스템별 그람 행렬/모멘트/에너지와 전체 합 캐시"""
    
    def __init__(self, fleet: FleetDataset):
        self.fleet = fleet
        self.grams = fleet.grams
        self.moments = fleet.moments
        self.energies = fleet.energies
        self.total_gram = self.grams.sum(axis=0)
        self.total_moment = self.moments.sum(axis=0)
        self.total_energy = float(self.energies.sum())
    
    @staticmethod
    def quadratic_sse(energy: float, moment: np.ndarray, gram: np.ndarray, theta: np.ndarray) -> float:
        """YᵀY − 2θᵀΦᵀY + θᵀΦᵀΦθ"""
        return max(float(energy - 2.0 * theta @ moment + theta @ gram @ theta), 0.0)
    
    def normal_group(self, positions: Sequence[int]) -> Tuple[float, np.ndarray, np.ndarray]:
        """γ 를 뺀 정상 그룹의 (에너지, 모멘트, 그람) 다운데이트"""
        positions = list(positions)
        energy = self.total_energy - float(self.energies[positions].sum())
        moment = self.total_moment - self.moments[positions].sum(axis=0)
        gram = self.total_gram - self.grams[positions].sum(axis=0)
        return energy, moment, gram


@dataclass(eq=False)
class HypothesisResult:
    """단일 가설의 비용과 파라미터 추정값"""
    
    hypothesis: Hypothesis
    cost: float
    nominal: np.ndarray
    anomal_params: Dict[int, np.ndarray] = field(default_factory=dict)
    
    def per_system_parameters(self, n_systems: int) -> np.ndarray:
        """0-노름 제약형 표현: 정상 시스템은 θ₀, 이상 시스템은 자기 추정값"""
        params = np.tile(self.nominal, (n_systems, 1))
        for tag, theta in self.anomal_params.items():
            params[tag - 1] = theta
        return params
    
    def to_solution(self, fleet: FleetDataset, p: int = 2,
                    support_tolerance: Optional[float] = None) -> Solution:
        per_system = self.per_system_parameters(fleet.n_systems)
        tolerance = resolve_support_tolerance(self.nominal, p, support_tolerance)
        return Solution.build(
            nominal=self.nominal,
            per_system=per_system,
            p=p,
            support_tolerance=tolerance,
            objective=self.cost,
            method='oracle',
            diagnostics={'k': self.hypothesis.k, 'sse': self.cost},
        )


@dataclass(eq=False)
class DetectionResult:
    """전수 탐색 결과: 최적 가설과 비용 순위표"""
    
    best: HypothesisResult
    ranking: pd.DataFrame
    k: int
    
    @property
    def cost(self) -> float:
        return self.best.cost
    
    @property
    def n_hypotheses(self) -> int:
        return len(self.ranking)
    
    def report_fields(self, top: int = DEFAULT_REPORT_TOP) -> Dict[str, Any]:
        """리포트용 가설 순위(상위 top 개), 가설 수, 이상 시스템별 파라미터 추정값"""
        head = self.ranking.head(top)
        return {
            'n_hypotheses': self.n_hypotheses,
            'hypotheses': [{'rank': int(row.rank), 'anomaly_set': list(row.anomaly_set), 'cost': float(row.cost)}
                           for row in head.itertuples(index=False)],
            'anomalous_parameters': [{'system': tag, 'theta': self.best.anomal_params[tag]}
                                     for tag in sorted(self.best.anomal_params)],
        }


def solve_hypothesis(fleet: FleetDataset, hypothesis: Hypothesis, cache: Optional[GramCache] = None,
                     ridge: bool = False) -> HypothesisResult:
    """가설 γ 의 최소 비용: 정상 그룹 통합 최소제곱 + 이상 시스템별 최소제곱"""
    hypothesis.validate(fleet.n_systems)
    if hypothesis.k >= fleet.n_systems:
        raise DomainError("정상 그룹이 비어 있습니다: 모든 시스템을 이상으로 가정할 수 없습니다")
    cache = cache or GramCache(fleet)
    positions = [tag - 1 for tag in hypothesis.anomaly_set]
    
    energy, moment, gram = cache.normal_group(positions)
    nominal = solve_normal_equations(gram, moment, ridge=ridge, subproblem="정상 그룹 통합 적합")
    cost = cache.quadratic_sse(energy, moment, gram, nominal)
    
    anomal_params = {}
    for tag, position in zip(hypothesis.anomaly_set, positions):
        theta = solve_normal_equations(cache.grams[position], cache.moments[position], ridge=ridge,
                                       subproblem=f"시스템 {tag} 개별 적합")
        anomal_params[tag] = theta
        cost += cache.quadratic_sse(cache.energies[position], cache.moments[position],
                                    cache.grams[position], theta)
    return HypothesisResult(hypothesis=hypothesis, cost=cost, nominal=nominal, anomal_params=anomal_params)


def enumerate_hypotheses(n_systems: int, k: int) -> Iterable[Hypothesis]:
    """사전식 순서의 k-부분집합 가설"""
    for subset in itertools.combinations(range(1, n_systems + 1), k):
        yield Hypothesis(subset)


def brute_force_detect(fleet: FleetDataset, k: int, cap: int = DEFAULT_ENUMERATION_CAP,
                       threads: int = 1, ridge: bool = False) -> DetectionResult:
    """모든 k-부분집합을 평가해서 비용 최소 가설 반환 (동률은 사전식으로 가장 작은 집합)"""
    if k < 0 or k >= fleet.n_systems:
        raise DomainError(f"k는 0 이상 N({fleet.n_systems}) 미만이어야 합니다: {k}")
    n_hypotheses = binomial_count(fleet.n_systems, k)
    if n_hypotheses > cap:
        raise EnumerationCapError(n_hypotheses, cap)
    
    cache = GramCache(fleet)
    
    def evaluate(hypothesis: Hypothesis) -> HypothesisResult:
        return solve_hypothesis(fleet, hypothesis, cache=cache, ridge=ridge)
    
    hypotheses = enumerate_hypotheses(fleet.n_systems, k)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(evaluate, hypotheses, chunksize=256))
    else:
        results = [evaluate(hypothesis) for hypothesis in hypotheses]
    
    # 순서와 무관한 결정적 축약: (비용, 부분집합) 사전식 최소
    results.sort(key=lambda result: (result.cost, result.hypothesis.anomaly_set))
    ranking = pd.DataFrame({
        'rank': np.arange(1, len(results) + 1),
        'anomaly_set': [result.hypothesis.anomaly_set for result in results],
        'cost': [result.cost for result in results],
    })
    return DetectionResult(best=results[0], ranking=ranking, k=k)


def zero_norm_objective(fleet: FleetDataset, result: HypothesisResult) -> Tuple[float, int]:
    """0-노름 제약형 표현에서의 (잔차제곱합, 0이 아닌 편차 수)"""
    per_system = result.per_system_parameters(fleet.n_systems)
    sse = group_lasso_objective(fleet, result.nominal, per_system, 0.0, 2)
    nonzero = int(np.count_nonzero(np.any(per_system != result.nominal[np.newaxis, :], axis=1)))
    return sse, nonzero
