"""
루프백 TCP 소켓 브로드캐스트 전송

각 노드는 127.0.0.1 의 허브 소켓에 연결하고, 허브의 수신 스레드가
길이 접두사 프레임을 읽어 반복별 메시지 함에 모은다.
"""
import socket
import threading
from collections import defaultdict
from typing import Dict, List, Optional

from fleet_anomaly.errors import ProtocolError
from fleet_anomaly.transports.base_transport import BaseTransport
from fleet_anomaly.transports.frame import LENGTH_PREFIX, BroadcastMessage, decode_body, encode_frame


def _receive_exactly(connection: socket.socket, size: int) -> Optional[bytes]:
    chunks = []
    remaining = size
    while remaining > 0:
        chunk = connection.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b''.join(chunks)


class LoopbackSocketTransport(BaseTransport):
    """루프백 소켓으로 실제 바이트 프레임을 주고받는 전송"""
    
    def __init__(self, timeout: float = 30.0):
        super().__init__()
        self.timeout = timeout
        self._condition = threading.Condition()
        self._inbox: Dict[int, List[BroadcastMessage]] = defaultdict(list)
        self._errors: List[Exception] = []
        self._server: Optional[socket.socket] = None
        self._senders: List[socket.socket] = []
        self._send_locks: List[threading.Lock] = []
        self._accepted: List[socket.socket] = []
        self._readers: List[threading.Thread] = []
    
    def open(self, n_nodes: int, dim: int):
        super().open(n_nodes, dim)
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.bind(('127.0.0.1', 0))
        self._server.listen(n_nodes)
        address = self._server.getsockname()
        
        for _ in range(n_nodes):
            sender = socket.create_connection(address, timeout=self.timeout)
            sender.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            accepted, _ = self._server.accept()
            self._senders.append(sender)
            self._send_locks.append(threading.Lock())
            self._accepted.append(accepted)
            reader = threading.Thread(target=self._read_loop, args=(accepted,), daemon=True)
            reader.start()
            self._readers.append(reader)
    
    def _read_loop(self, connection: socket.socket):
        """허브 수신 스레드: 프레임을 읽어 메시지 함에 추가"""
        try:
            while True:
                prefix = _receive_exactly(connection, LENGTH_PREFIX.size)
                if prefix is None:
                    return
                (length,) = LENGTH_PREFIX.unpack(prefix)
                body = _receive_exactly(connection, length)
                if body is None:
                    raise ProtocolError("프레임 수신 중 연결이 끊어졌습니다")
                message = decode_body(body)
                with self._condition:
                    self._inbox[message.iteration].append(message)
                    self._condition.notify_all()
        except OSError:
            return
        except ProtocolError as error:
            with self._condition:
                self._errors.append(error)
                self._condition.notify_all()
    
    def broadcast(self, message: BroadcastMessage):
        frame = encode_frame(message)
        if not 0 <= message.sender < len(self._senders):
            raise ProtocolError("알 수 없는 노드의 전송", node=message.sender)
        with self._send_locks[message.sender]:
            try:
                self._senders[message.sender].sendall(frame)
            except OSError as error:
                raise ProtocolError(f"소켓 전송 실패: {error}", node=message.sender)
        with self._condition:
            self.messages_sent += 1
    
    def collect(self, iteration: int) -> List[BroadcastMessage]:
        with self._condition:
            ready = self._condition.wait_for(
                lambda: self._errors or len(self._inbox.get(iteration, [])) >= self.n_nodes,
                timeout=self.timeout,
            )
            if self._errors:
                raise self._errors[0]
            messages = list(self._inbox.get(iteration, []))
            for old in [key for key in self._inbox if key < iteration - 1]:
                del self._inbox[old]
        if not ready:
            missing = sorted(set(range(self.n_nodes)) - {message.sender for message in messages})
            raise ProtocolError(f"반복 {iteration} 메시지 대기 시간 초과",
                                node=missing[0] if missing else None)
        return self._validated(iteration, messages)
    
    def close(self):
        for connection in self._senders + self._accepted:
            try:
                connection.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            connection.close()
        if self._server is not None:
            self._server.close()
        for reader in self._readers:
            reader.join(timeout=1.0)
        self._senders, self._accepted, self._readers, self._send_locks = [], [], [], []
        self._server = None
