"""
이상탐지 솔버 예외 모듈
"""
from typing import Any, Dict, List, Optional


class FleetAnomalyError(Exception):
    """패키지 공통 기본 예외"""


class DomainError(FleetAnomalyError, ValueError):
    """입력값이 연산의 정의역을 벗어난 경우"""


class SingularityError(DomainError):
    """그람 행렬이 특이(rank 부족)한 경우"""
    
    def __init__(self, message: str, rank: int, dimension: int, subproblem: Optional[str] = None):
        self.rank = rank
        self.dimension = dimension
        self.subproblem = subproblem
        if subproblem:
            message = f"{message} (하위 문제: {subproblem}, rank={rank}/{dimension})"
        else:
            message = f"{message} (rank={rank}/{dimension})"
        super().__init__(message)


class NonConvergenceError(FleetAnomalyError):
    """반복 상한 내에 허용오차를 만족하지 못한 경우"""
    
    def __init__(self, message: str, iterations: int, residual: float,
                 last_iterate: Any = None, history: Optional[List[Dict[str, float]]] = None):
        self.iterations = iterations
        self.residual = residual
        self.last_iterate = last_iterate
        self.history = history or []
        super().__init__(f"{message} (반복 {iterations}회, 잔차 {residual:.3e})")


class ProtocolError(FleetAnomalyError):
    """브로드캐스트 메시지 누락/중복 등 통신 규약 위반"""
    
    def __init__(self, message: str, node: Optional[int] = None):
        self.node = node
        if node is not None:
            message = f"{message} (노드 {node})"
        super().__init__(message)


class EnumerationCapError(FleetAnomalyError):
    """가설 개수가 열거 상한을 넘어 전수 탐색을 거부한 경우"""
    
    def __init__(self, n_hypotheses: int, cap: int):
        self.n_hypotheses = n_hypotheses
        self.cap = cap
        super().__init__(
            f"가설 {n_hypotheses:,}개가 열거 상한 {cap:,}개를 초과합니다. "
            f"완화 문제 솔버(--method central 또는 admm)를 사용하세요."
        )
