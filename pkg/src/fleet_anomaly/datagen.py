"""
합성 함대 데이터 생성 모듈

난수 생성기: numpy PCG64 비트 생성기 + Generator.standard_normal.
추출 순서는 시스템 번호 순으로 (파라미터 → 회귀 벡터 Ω개 → 잡음 Ω개) 고정이다.
"""
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fleet_anomaly.core import FleetDataset, FleetTruth, SystemDataset
from fleet_anomaly.errors import DomainError

RNG_ALGORITHM = "numpy.random.PCG64/standard_normal"
PSD_TOLERANCE = 1e-10

# 기준 수치 실험 상수
REFERENCE_NOMINAL_MEAN = [0.8, -2.7, -0.63, 0.46]
REFERENCE_NOMINAL_COV = [
    [0.04, 0.12, -0.02, 0.02],
    [0.12, 0.84, -0.09, 0.1],
    [-0.02, -0.09, 0.03, 0.0],
    [0.02, 0.1, 0.0, 0.05],
]
REFERENCE_ANOMAL_MEAN = [3.5, -0.1, -3.0, 0.001]
REFERENCE_REGRESSOR_MEAN = [0.95, -1.22, -2.79, 7.11]
REFERENCE_REGRESSOR_COV = [
    [0.25, -0.02, 0.12, -0.04],
    [-0.02, 0.45, 0.03, -0.52],
    [0.12, 0.03, 1.05, -1.26],
    [-0.04, -0.52, -1.26, 3.89],
]
REFERENCE_ANOMALIES = (27, 161, 183)


def _as_vector(values, name: str, dim: int) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64).reshape(-1)
    if vector.shape != (dim,):
        raise DomainError(f"{name} 길이가 m={dim}과 다릅니다: {vector.shape}")
    return vector


def _as_matrix(values, name: str, dim: int) -> np.ndarray:
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.shape != (dim, dim):
        raise DomainError(f"{name} 크기가 {dim}x{dim}이 아닙니다: {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise DomainError(f"{name}가 대칭 행렬이 아닙니다")
    return matrix


def covariance_factor(cov: np.ndarray, name: str = "cov") -> np.ndarray:
    """공분산의 하삼각 촐레스키 인자 (반정부호면 대각에 허용오차만큼 더해서 분해)"""
    cov = np.asarray(cov, dtype=np.float64)
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    shift = PSD_TOLERANCE * max(1.0, float(np.trace(cov)))
    try:
        return np.linalg.cholesky(cov + shift * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError:
        raise DomainError(f"{name}가 양의 반정부호가 아니어서 촐레스키 분해에 실패했습니다")


def mvn_sample(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator,
               size: Optional[int] = None, factor: Optional[np.ndarray] = None) -> np.ndarray:
    """mean + L·z (L: 하삼각 촐레스키 인자, z: 표준정규)"""
    mean = np.asarray(mean, dtype=np.float64)
    if factor is None:
        factor = covariance_factor(cov)
    if size is None:
        z = rng.standard_normal(mean.shape[0])
        return mean + factor @ z
    z = rng.standard_normal((size, mean.shape[0]))
    return mean[np.newaxis, :] + z @ factor.T


@dataclass(eq=False)
class GenConfig:
    """합성 함대 생성 설정"""
    
    n_systems: int
    n_obs: int
    dim: int
    noise_variance: float
    nominal_mean: Sequence[float]
    nominal_cov: Sequence[Sequence[float]]
    anomal_mean: Sequence[float]
    anomal_cov: Sequence[Sequence[float]]
    regressor_mean: Sequence[float]
    regressor_cov: Sequence[Sequence[float]]
    anomaly_indices: Tuple[int, ...] = ()
    seed: int = 0
    
    def __post_init__(self):
        if self.n_systems < 1 or self.n_obs < 1 or self.dim < 1:
            raise DomainError("N, Ω, m은 1 이상이어야 합니다")
        if not self.noise_variance >= 0:
            raise DomainError(f"잡음 분산은 0 이상이어야 합니다: {self.noise_variance}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError(f"시드는 64비트 부호 없는 정수여야 합니다: {self.seed}")
        self.seed = int(self.seed)
        self.nominal_mean = _as_vector(self.nominal_mean, 'nominal_mean', self.dim)
        self.anomal_mean = _as_vector(self.anomal_mean, 'anomal_mean', self.dim)
        self.regressor_mean = _as_vector(self.regressor_mean, 'regressor_mean', self.dim)
        self.nominal_cov = _as_matrix(self.nominal_cov, 'nominal_cov', self.dim)
        self.anomal_cov = _as_matrix(self.anomal_cov, 'anomal_cov', self.dim)
        self.regressor_cov = _as_matrix(self.regressor_cov, 'regressor_cov', self.dim)
        self.anomaly_indices = tuple(sorted({int(i) for i in self.anomaly_indices}))
        for index in self.anomaly_indices:
            if not 1 <= index <= self.n_systems:
                raise DomainError(f"이상 시스템 번호 {index}가 1..{self.n_systems} 범위를 벗어났습니다")
    
    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_systems': self.n_systems,
            'n_obs': self.n_obs,
            'dim': self.dim,
            'noise_variance': float(self.noise_variance),
            'nominal_mean': self.nominal_mean.tolist(),
            'nominal_cov': self.nominal_cov.tolist(),
            'anomal_mean': self.anomal_mean.tolist(),
            'anomal_cov': self.anomal_cov.tolist(),
            'regressor_mean': self.regressor_mean.tolist(),
            'regressor_cov': self.regressor_cov.tolist(),
            'anomaly_indices': list(self.anomaly_indices),
            'seed': self.seed,
        }
    
    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "GenConfig":
        known = {key: values[key] for key in cls.__dataclass_fields__ if key in values}
        missing = [key for key in ('n_systems', 'n_obs', 'dim', 'noise_variance', 'nominal_mean',
                                   'nominal_cov', 'anomal_mean', 'anomal_cov', 'regressor_mean',
                                   'regressor_cov') if key not in known]
        if missing:
            raise DomainError(f"설정에 필수 항목이 없습니다: {', '.join(missing)}")
        return cls(**known)
    
    @classmethod
    def from_json_file(cls, path: str) -> "GenConfig":
        """JSON 설정 파일 로드"""
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                values = json.load(handle)
        except FileNotFoundError:
            raise DomainError(f"설정 파일이 없습니다: {path}")
        except json.JSONDecodeError as error:
            raise DomainError(f"설정 파일 JSON 형식 오류: {path}: {error}")
        return cls.from_dict(values)
    
    def with_seed(self, seed: int) -> "GenConfig":
        values = self.to_dict()
        values['seed'] = seed
        return GenConfig.from_dict(values)
    
    def config_hash(self) -> str:
        """정규화한 JSON 의 sha256"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def default_paper_config(seed: int = 0) -> GenConfig:
    """기준 수치 실험 설정 (m=4, N=200, Ω=500, σ²=0.83, 이상 27·161·183)"""
    return GenConfig(
        n_systems=200,
        n_obs=500,
        dim=4,
        noise_variance=0.83,
        nominal_mean=REFERENCE_NOMINAL_MEAN,
        nominal_cov=REFERENCE_NOMINAL_COV,
        anomal_mean=REFERENCE_ANOMAL_MEAN,
        anomal_cov=REFERENCE_NOMINAL_COV,
        regressor_mean=REFERENCE_REGRESSOR_MEAN,
        regressor_cov=REFERENCE_REGRESSOR_COV,
        anomaly_indices=REFERENCE_ANOMALIES,
        seed=seed,
    )


def generate_fleet(config: GenConfig) -> FleetDataset:
    """설정에 따라 식 y_i(t) = φ_iᵀ(t)θ_{i,0} + e_i(t) 로 함대 데이터 생성"""
    nominal_factor = covariance_factor(config.nominal_cov, 'nominal_cov')
    anomal_factor = covariance_factor(config.anomal_cov, 'anomal_cov')
    regressor_factor = covariance_factor(config.regressor_cov, 'regressor_cov')
    noise_scale = float(np.sqrt(config.noise_variance))
    anomalies = set(config.anomaly_indices)
    
    rng = np.random.Generator(np.random.PCG64(config.seed))
    systems: List[SystemDataset] = []
    true_params = np.zeros((config.n_systems, config.dim))
    
    for tag in range(1, config.n_systems + 1):
        if tag in anomalies:
            theta = mvn_sample(config.anomal_mean, config.anomal_cov, rng, factor=anomal_factor)
        else:
            theta = mvn_sample(config.nominal_mean, config.nominal_cov, rng, factor=nominal_factor)
        regressors = mvn_sample(config.regressor_mean, config.regressor_cov, rng,
                                size=config.n_obs, factor=regressor_factor)
        noise = noise_scale * rng.standard_normal(config.n_obs)
        true_params[tag - 1] = theta
        systems.append(SystemDataset(measurements=regressors @ theta + noise, regressors=regressors))
    
    truth = FleetTruth(nominal_params=true_params, anomaly_indices=config.anomaly_indices,
                       noise_variance=float(config.noise_variance))
    return FleetDataset(tuple(systems), truth)
