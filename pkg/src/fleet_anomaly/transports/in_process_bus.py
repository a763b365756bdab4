"""
프로세스 내부 브로드캐스트 버스 (기본, 결정적)
"""
import threading
from collections import defaultdict
from typing import Dict, List

import numpy as np

from fleet_anomaly.errors import ProtocolError
from fleet_anomaly.transports.base_transport import BaseTransport
from fleet_anomaly.transports.frame import BroadcastMessage


class InProcessBus(BaseTransport):
    """잠금으로 보호되는 반복별 메시지 함"""
    
    def __init__(self):
        super().__init__()
        self._lock = threading.Lock()
        self._inbox: Dict[int, List[BroadcastMessage]] = defaultdict(list)
    
    def open(self, n_nodes: int, dim: int):
        super().open(n_nodes, dim)
        with self._lock:
            self._inbox.clear()
    
    def broadcast(self, message: BroadcastMessage):
        # 보낸 뒤 노드가 상태를 바꿔도 메시지는 그대로 유지
        frozen = BroadcastMessage(iteration=message.iteration, sender=message.sender,
                                  beta=np.array(message.beta, dtype=np.float64),
                                  w=np.array(message.w, dtype=np.float64))
        with self._lock:
            self._inbox[message.iteration].append(frozen)
            self.messages_sent += 1
    
    def collect(self, iteration: int) -> List[BroadcastMessage]:
        with self._lock:
            messages = list(self._inbox.get(iteration, []))
            for old in [key for key in self._inbox if key < iteration - 1]:
                del self._inbox[old]
        if len(messages) > self.n_nodes:
            raise ProtocolError(f"반복 {iteration}의 메시지가 {len(messages)}개로 노드 수보다 많습니다")
        return self._validated(iteration, messages)
