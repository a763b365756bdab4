"""
함대 데이터 파일 입출력 모듈

파일 구조 (리틀 엔디언):
    8바이트 매직 b"FLEETDS1"
    8바이트 부호 없는 정수: 헤더 길이 L
    L바이트 UTF-8 JSON 헤더 (키 정렬)
    시스템 순서대로 [Φ_i (Ω_i×m, 행 우선) float64][Y_i (Ω_i) float64]
    정답 기록이 있으면 마지막에 θ_{i,0} 행렬 (N×m) float64
"""
import json
import os
import struct
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from fleet_anomaly.core import FleetDataset, FleetTruth, SystemDataset
from fleet_anomaly.datagen import RNG_ALGORITHM, GenConfig
from fleet_anomaly.errors import DomainError

MAGIC = b"FLEETDS1"
FORMAT_VERSION = 1
FLOAT_DTYPE = np.dtype('<f8')


def build_header(fleet: FleetDataset, config: Optional[GenConfig] = None) -> Dict[str, Any]:
    """파일 헤더 사전 생성"""
    header = {
        'format_version': FORMAT_VERSION,
        'n_systems': fleet.n_systems,
        'dim': fleet.dim,
        'n_obs': [system.n_obs for system in fleet.systems],
        'dtype': 'float64-le',
        'rng_algorithm': RNG_ALGORITHM,
        'seed': config.seed if config is not None else None,
        'config_hash': config.config_hash() if config is not None else None,
        'config': config.to_dict() if config is not None else None,
        'truth': None,
    }
    if fleet.truth is not None:
        header['truth'] = {
            'anomaly_indices': list(fleet.truth.anomaly_indices),
            'noise_variance': fleet.truth.noise_variance,
        }
    return header


def write_fleet(fleet: FleetDataset, path: str, config: Optional[GenConfig] = None) -> str:
    """함대 데이터를 자기 기술형 이진 파일로 저장"""
    header_bytes = json.dumps(build_header(fleet, config), sort_keys=True,
                              separators=(',', ':')).encode('utf-8')
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as handle:
        handle.write(MAGIC)
        handle.write(struct.pack('<Q', len(header_bytes)))
        handle.write(header_bytes)
        for system in fleet.systems:
            handle.write(np.ascontiguousarray(system.regressors, dtype=FLOAT_DTYPE).tobytes())
            handle.write(np.ascontiguousarray(system.measurements, dtype=FLOAT_DTYPE).tobytes())
        if fleet.truth is not None:
            handle.write(np.ascontiguousarray(fleet.truth.nominal_params, dtype=FLOAT_DTYPE).tobytes())
    return path


def _read_block(buffer: bytes, offset: int, count: int) -> Tuple[np.ndarray, int]:
    size = count * FLOAT_DTYPE.itemsize
    if offset + size > len(buffer):
        raise DomainError("데이터 파일이 헤더에 기록된 크기보다 짧습니다")
    block = np.frombuffer(buffer, dtype=FLOAT_DTYPE, count=count, offset=offset).astype(np.float64)
    return block, offset + size


def read_fleet(path: str) -> Tuple[FleetDataset, Dict[str, Any]]:
    """이진 파일에서 함대 데이터와 헤더 로드"""
    try:
        with open(path, 'rb') as handle:
            buffer = handle.read()
    except FileNotFoundError:
        raise DomainError(f"데이터 파일이 없습니다: {path}")
    if buffer[:len(MAGIC)] != MAGIC:
        raise DomainError(f"함대 데이터 파일 형식이 아닙니다: {path}")
    (header_length,) = struct.unpack_from('<Q', buffer, len(MAGIC))
    offset = len(MAGIC) + 8
    try:
        header = json.loads(buffer[offset:offset + header_length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise DomainError(f"데이터 파일 헤더를 읽을 수 없습니다: {error}")
    offset += header_length
    if header.get('format_version') != FORMAT_VERSION:
        raise DomainError(f"지원하지 않는 파일 버전입니다: {header.get('format_version')}")
    
    dim = int(header['dim'])
    systems: List[SystemDataset] = []
    for n_obs in header['n_obs']:
        regressors, offset = _read_block(buffer, offset, n_obs * dim)
        measurements, offset = _read_block(buffer, offset, n_obs)
        systems.append(SystemDataset(measurements=measurements, regressors=regressors.reshape(n_obs, dim)))
    
    truth = None
    if header.get('truth') is not None:
        params, offset = _read_block(buffer, offset, len(systems) * dim)
        truth = FleetTruth(nominal_params=params.reshape(len(systems), dim),
                           anomaly_indices=tuple(header['truth']['anomaly_indices']),
                           noise_variance=float(header['truth']['noise_variance']))
    if offset != len(buffer):
        raise DomainError("데이터 파일 끝에 알 수 없는 바이트가 있습니다")
    return FleetDataset(tuple(systems), truth), header


def export_system_csv(fleet: FleetDataset, directory: str) -> List[str]:
    """시스템별 CSV (phi_1..phi_m, y) 내보내기"""
    os.makedirs(directory, exist_ok=True)
    width = len(str(fleet.n_systems))
    paths = []
    for tag, system in enumerate(fleet.systems, 1):
        frame = pd.DataFrame(system.regressors, columns=[f'phi_{q}' for q in range(1, fleet.dim + 1)])
        frame['y'] = system.measurements
        path = os.path.join(directory, f'system_{tag:0{width}d}.csv')
        frame.to_csv(path, index_label='t', float_format='%.17g')
        paths.append(path)
    return paths
