"""
탐지 방법 팩토리

central   합-노름 문제 중앙집중 풀이 (λ 지정 또는 k 로 λ 탐색)
admm      합-노름 문제 분산 ADMM 풀이
oracle    k-부분집합 전수 탐색
tikhonov  제곱 노름 비교 기준 (임계값 판정)
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from fleet_anomaly.admm import run_distributed
from fleet_anomaly.baseline import DEFAULT_THRESHOLD, solve_tikhonov
from fleet_anomaly.config import AdmmConfig, SolverConfig
from fleet_anomaly.core import FleetDataset, Solution
from fleet_anomaly.errors import DomainError
from fleet_anomaly.oracle import DEFAULT_ENUMERATION_CAP, DetectionResult, brute_force_detect
from fleet_anomaly.solver import solve_group_lasso
from fleet_anomaly.transport_factory import TransportFactory
from fleet_anomaly.tuning import tune_lambda_for_k


@dataclass
class DetectionRequest:
    """탐지 실행 파라미터"""

    lam: Optional[float] = None
    k: Optional[int] = None
    p: int = 2
    threads: int = 1
    ridge: bool = False
    transport: str = 'in_process'
    threshold: float = DEFAULT_THRESHOLD
    cap: int = DEFAULT_ENUMERATION_CAP
    max_iterations: Optional[int] = None
    verbose: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)


class BaseDetector(ABC):
    """탐지 방법 기본 클래스"""

    name = 'base'

    @abstractmethod
    def detect(self, fleet: FleetDataset, request: DetectionRequest) -> Solution:
        """탐지 실행 - 하위 클래스에서 구현"""

    def report_extra(self) -> Dict[str, Any]:
        """직전 detect 결과에서 리포트에 덧붙일 방법별 항목 (기본 없음)"""
        return {}

    def _require_lambda(self, request: DetectionRequest) -> float:
        if request.lam is None:
            raise DomainError(f"{self.name} 방법에는 --lambda 가 필요합니다")
        return request.lam


class CentralDetector(BaseDetector):
    name = 'central'

    def detect(self, fleet: FleetDataset, request: DetectionRequest) -> Solution:
        overrides = {} if request.max_iterations is None else {'max_iterations': request.max_iterations}
        if request.lam is None and request.k is not None:
            cfg = SolverConfig(lam=0.0, p=request.p, ridge=request.ridge, threads=request.threads,
                               verbose=request.verbose, **overrides)
            tuned = tune_lambda_for_k(fleet, request.k, cfg)
            tuned.solution.diagnostics.update({'k_target': tuned.k_target, 'achieved_k': tuned.achieved_k,
                                               'lambda_max': tuned.lambda_max})
            return tuned.solution
        cfg = SolverConfig(lam=self._require_lambda(request), p=request.p, ridge=request.ridge,
                           threads=request.threads, verbose=request.verbose, **overrides)
        return solve_group_lasso(fleet, cfg)


class AdmmDetector(BaseDetector):
    name = 'admm'

    def detect(self, fleet: FleetDataset, request: DetectionRequest) -> Solution:
        overrides = {} if request.max_iterations is None else {'max_iterations': request.max_iterations}
        cfg = AdmmConfig(threads=request.threads, verbose=request.verbose, **overrides)
        transport = TransportFactory.create_transport(request.transport)
        return run_distributed(fleet, self._require_lambda(request), request.p, cfg, transport=transport)


class OracleDetector(BaseDetector):
    name = 'oracle'

    def __init__(self):
        self.result: Optional[DetectionResult] = None

    def detect(self, fleet: FleetDataset, request: DetectionRequest) -> Solution:
        if request.k is None:
            raise DomainError("oracle 방법에는 --k 가 필요합니다")
        self.result = brute_force_detect(fleet, request.k, cap=request.cap, threads=request.threads,
                                         ridge=request.ridge)
        solution = self.result.best.to_solution(fleet, p=request.p)
        solution.diagnostics['n_hypotheses'] = self.result.n_hypotheses
        return solution

    def report_extra(self) -> Dict[str, Any]:
        """가설 순위, 비용, 이상 시스템별 파라미터 추정값"""
        return {} if self.result is None else self.result.report_fields()


class TikhonovDetector(BaseDetector):
    name = 'tikhonov'

    def detect(self, fleet: FleetDataset, request: DetectionRequest) -> Solution:
        return solve_tikhonov(fleet, self._require_lambda(request), threshold=request.threshold)


class DetectorFactory:
    """탐지 방법 팩토리"""

    SUPPORTED_METHODS = ('central', 'admm', 'oracle', 'tikhonov')

    @staticmethod
    def create_detector(method: str) -> BaseDetector:
        """탐지기 생성"""
        if method == 'central':
            return CentralDetector()
        elif method == 'admm':
            return AdmmDetector()
        elif method == 'oracle':
            return OracleDetector()
        elif method == 'tikhonov':
            return TikhonovDetector()
        else:
            raise DomainError(f"지원하지 않는 탐지 방법: {method}")
