"""
브로드캐스트 전송 기본 클래스
"""
from abc import ABC, abstractmethod
from typing import List, Optional

from fleet_anomaly.errors import ProtocolError
from fleet_anomaly.transports.frame import BroadcastMessage


class BaseTransport(ABC):
    """노드 간 (β_i, w_i) 브로드캐스트 전송 기본 클래스"""
    
    def __init__(self):
        self.n_nodes: Optional[int] = None
        self.dim: Optional[int] = None
        self.messages_sent = 0
    
    def open(self, n_nodes: int, dim: int):
        """전송 계층 준비"""
        self.n_nodes = n_nodes
        self.dim = dim
        self.messages_sent = 0
    
    def close(self):
        """자원 해제"""
    
    @abstractmethod
    def broadcast(self, message: BroadcastMessage):
        """메시지를 모든 노드에 전달 - 하위 클래스에서 구현"""
    
    @abstractmethod
    def collect(self, iteration: int) -> List[BroadcastMessage]:
        """해당 반복의 메시지 N개를 보낸 노드 순으로 반환 - 하위 클래스에서 구현"""
    
    def _validated(self, iteration: int, messages: List[BroadcastMessage]) -> List[BroadcastMessage]:
        """누락/중복 검사 후 보낸 노드 순 정렬"""
        seen = set()
        for message in messages:
            if message.iteration != iteration:
                raise ProtocolError(f"반복 {iteration}에 반복 {message.iteration}의 메시지가 섞였습니다",
                                    node=message.sender)
            if message.sender in seen:
                raise ProtocolError("중복 메시지", node=message.sender)
            if not 0 <= message.sender < self.n_nodes:
                raise ProtocolError("알 수 없는 노드의 메시지", node=message.sender)
            seen.add(message.sender)
        for node in range(self.n_nodes):
            if node not in seen:
                raise ProtocolError(f"반복 {iteration}의 메시지가 누락되었습니다", node=node)
        return sorted(messages, key=lambda message: message.sender)
    
    def __enter__(self):
        return self
    
    def __exit__(self, exc_type, exc, traceback):
        self.close()
