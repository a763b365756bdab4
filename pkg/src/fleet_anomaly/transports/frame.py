"""
브로드캐스트 이진 프레임 인코딩

프레임 (리틀 엔디언):
    u32  본문 길이 L (이 필드 제외)
    4B   매직 b"ADMF"
    u16  버전 (1)
    u32  반복 번호
    u32  보낸 노드 위치 (0부터)
    u32  차원 m
    m×f64 β_i
    m×f64 w_i
"""
import struct
from dataclasses import dataclass

import numpy as np

from fleet_anomaly.errors import ProtocolError

FRAME_MAGIC = b"ADMF"
FRAME_VERSION = 1
LENGTH_PREFIX = struct.Struct('<I')
FRAME_HEADER = struct.Struct('<4sHIII')


@dataclass(frozen=True, eq=False)
class BroadcastMessage:
    """한 노드가 한 반복에서 보내는 (β_i, w_i)"""
    
    iteration: int
    sender: int
    beta: np.ndarray
    w: np.ndarray


def encode_frame(message: BroadcastMessage) -> bytes:
    """길이 접두사가 붙은 프레임 생성"""
    beta = np.ascontiguousarray(message.beta, dtype='<f8')
    w = np.ascontiguousarray(message.w, dtype='<f8')
    body = FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, message.iteration, message.sender, beta.shape[0])
    body += beta.tobytes() + w.tobytes()
    return LENGTH_PREFIX.pack(len(body)) + body


def decode_body(body: bytes) -> BroadcastMessage:
    """길이 접두사를 뗀 본문 해석"""
    if len(body) < FRAME_HEADER.size:
        raise ProtocolError("프레임이 헤더보다 짧습니다")
    magic, version, iteration, sender, dim = FRAME_HEADER.unpack_from(body, 0)
    if magic != FRAME_MAGIC or version != FRAME_VERSION:
        raise ProtocolError(f"알 수 없는 프레임 형식입니다: {magic!r} v{version}")
    expected = FRAME_HEADER.size + 2 * dim * 8
    if len(body) != expected:
        raise ProtocolError(f"프레임 길이 불일치: {len(body)} != {expected}", node=sender)
    values = np.frombuffer(body, dtype='<f8', count=2 * dim, offset=FRAME_HEADER.size).astype(np.float64)
    return BroadcastMessage(iteration=iteration, sender=sender, beta=values[:dim], w=values[dim:])


def decode_frame(frame: bytes) -> BroadcastMessage:
    """길이 접두사 포함 프레임 해석"""
    (length,) = LENGTH_PREFIX.unpack_from(frame, 0)
    body = frame[LENGTH_PREFIX.size:]
    if len(body) != length:
        raise ProtocolError(f"프레임 길이 접두사 불일치: {len(body)} != {length}")
    return decode_body(body)
