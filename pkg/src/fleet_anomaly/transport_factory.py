"""
브로드캐스트 전송 팩토리
"""
from fleet_anomaly.errors import DomainError
from fleet_anomaly.transports.in_process_bus import InProcessBus
from fleet_anomaly.transports.loopback_socket import LoopbackSocketTransport


class TransportFactory:
    """브로드캐스트 전송 팩토리"""
    
    SUPPORTED_TRANSPORTS = ('in_process', 'socket')
    
    @staticmethod
    def create_transport(transport_type: str):
        """전송 생성"""
        if transport_type == 'in_process':
            return InProcessBus()
        elif transport_type == 'socket':
            return LoopbackSocketTransport()
        else:
            raise DomainError(f"지원하지 않는 전송 타입: {transport_type}")
