"""
함대 이상탐지 설정 모듈
"""
import itertools
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np

from fleet_anomaly.errors import DomainError

THREADS_ENV_VAR = "FLEET_THREADS"
SUPPORTED_NORMS = (1, 2)


def _check_norm(p: int):
    if p not in SUPPORTED_NORMS:
        raise DomainError(f"p는 1 또는 2여야 합니다: {p}")


def _check_positive(**values: float):
    for name, value in values.items():
        if not value > 0:
            raise DomainError(f"{name}는 0보다 커야 합니다: {value}")


def resolve_support_tolerance(nominal: np.ndarray, p: int, explicit: Optional[float] = None) -> float:
    """편차 노름 판정 임계값 (미지정 시 1e-6·(1+‖θ̂‖_p))"""
    if explicit is not None:
        return float(explicit)
    return 1e-6 * (1.0 + float(np.linalg.norm(nominal, ord=p)))


def resolve_threads(threads: Optional[int] = None) -> int:
    """스레드 수 결정 (인자 → FLEET_THREADS 환경변수 → 1)"""
    if threads is None:
        env_value = os.environ.get(THREADS_ENV_VAR)
        if env_value:
            try:
                threads = int(env_value)
            except ValueError:
                raise DomainError(f"{THREADS_ENV_VAR} 값이 정수가 아닙니다: {env_value}")
        else:
            threads = 1
    if threads < 1:
        raise DomainError(f"스레드 수는 1 이상이어야 합니다: {threads}")
    return threads


@dataclass
class SolverConfig:
    """중앙집중 그룹 라쏘 솔버 설정"""
    
    lam: float
    p: int = 2
    max_iterations: int = 20000
    objective_tolerance: float = 1e-10
    kkt_tolerance: float = 1e-6
    support_tolerance: Optional[float] = None
    inner_tolerance: float = 1e-12
    inner_max_iterations: int = 10000
    ridge: bool = False
    threads: int = 1
    verbose: bool = False
    
    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError(f"lambda는 0 이상이어야 합니다: {self.lam}")
        _check_norm(self.p)
        _check_positive(objective_tolerance=self.objective_tolerance,
                        kkt_tolerance=self.kkt_tolerance,
                        inner_tolerance=self.inner_tolerance)
        if self.support_tolerance is not None:
            _check_positive(support_tolerance=self.support_tolerance)
        if self.max_iterations < 1 or self.inner_max_iterations < 1:
            raise DomainError("반복 상한은 1 이상이어야 합니다")
    
    def with_lambda(self, lam: float) -> "SolverConfig":
        """lambda만 바꾼 사본 반환"""
        values = asdict(self)
        values['lam'] = lam
        return SolverConfig(**values)
    
    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values['lambda'] = values.pop('lam')
        values.pop('verbose')
        values.pop('threads')
        return values


@dataclass
class AdmmConfig:
    """분산 ADMM 설정

    rho 가 None 이면 시스템 그람 행렬 대각 평균의 2배(2G_i 대각 평균)로 시작한다.
    warm_start 이면 통합 최소제곱 θ* 와 w_i = 2(G_iθ* − b_i) 에서, 아니면 모든 상태 0 에서 출발한다.
    """

    rho: Optional[float] = None
    warm_start: bool = True
    adaptive_rho: bool = True
    mu: float = 10.0
    tau_incr: float = 2.0
    tau_decr: float = 2.0
    eps_abs: float = 1e-4
    eps_rel: float = 1e-3
    max_iterations: int = 1000
    inner_tolerance: float = 1e-10
    inner_max_iterations: int = 100
    support_tolerance: Optional[float] = None
    threads: int = 1
    verbose: bool = False
    
    def __post_init__(self):
        _check_positive(eps_abs=self.eps_abs, eps_rel=self.eps_rel, inner_tolerance=self.inner_tolerance)
        if self.rho is not None:
            _check_positive(rho=self.rho)
        if not self.mu > 1:
            raise DomainError(f"mu는 1보다 커야 합니다: {self.mu}")
        if not (self.tau_incr > 1 and self.tau_decr > 1):
            raise DomainError(f"tau는 1보다 커야 합니다: {self.tau_incr}, {self.tau_decr}")
        if self.support_tolerance is not None:
            _check_positive(support_tolerance=self.support_tolerance)
        if self.max_iterations < 1 or self.inner_max_iterations < 1:
            raise DomainError("반복 상한은 1 이상이어야 합니다")
    
    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values.pop('verbose')
        values.pop('threads')
        return values


class FleetAnomalyConfig:
    """결과 디렉토리와 실행 환경 설정 클래스"""
    
    RESULT_KINDS = ('detect', 'compare', 'tune', 'reproduction')
    
    def __init__(self, project_root: Optional[str] = None, threads: Optional[int] = None):
        # 현재 파일의 디렉토리 (/src/fleet_anomaly)
        current_dir = os.path.dirname(os.path.abspath(__file__))
        
        # 프로젝트 루트 디렉토리 (/src 의 상위)
        self.project_root = project_root or os.path.dirname(os.path.dirname(current_dir))
        
        # 디렉토리 경로 설정
        self.configs_dir = os.path.join(self.project_root, 'configs')
        self.results_base_dir = os.path.join(self.project_root, 'results', 'fleet_anomaly')
        
        # 실행 환경
        self.threads = resolve_threads(threads)
        
        # 세션 디렉토리 (실행 시 설정됨)
        self.result_kind = 'detect'
        self.result_session_dir = None
    
    def set_result_kind(self, result_kind: str):
        """결과 종류 설정 (detect, compare, tune, reproduction)"""
        if result_kind not in self.RESULT_KINDS:
            raise DomainError(f"result_kind는 {', '.join(self.RESULT_KINDS)} 중 하나여야 합니다: {result_kind}")
        self.result_kind = result_kind
    
    def create_session_directory(self, base_session_name: str) -> str:
        """세션별 결과 디렉토리 생성 (이미 있으면 이름(1), 이름(2), ... 순으로 비어 있는 이름 사용)"""
        kind_dir = os.path.join(self.results_base_dir, self.result_kind)
        os.makedirs(kind_dir, exist_ok=True)
        for counter in itertools.count():
            session_name = base_session_name if counter == 0 else f"{base_session_name}({counter})"
            candidate = os.path.join(kind_dir, session_name)
            try:
                os.mkdir(candidate)
            except FileExistsError:
                continue
            self.result_session_dir = candidate
            return candidate
    
    def get_paper_config_path(self) -> str:
        """기준 실험 설정 파일 경로"""
        return os.path.join(self.configs_dir, 'paper_defaults.json')
    
    def __str__(self):
        """설정 정보를 문자열로 반환"""
        return f"""
=== 함대 이상탐지 실행 설정 ===
프로젝트 루트: {self.project_root}
스레드 수: {self.threads}
결과 종류: {self.result_kind}
세션 디렉토리: {self.result_session_dir or '미설정'}
"""
