"""
공통 테스트 픽스처
"""
import os
import sys

import numpy as np
import pytest

# src 디렉토리 경로 설정
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT_DIR, 'src'))

from fleet_anomaly.core import FleetDataset, SystemDataset
from fleet_anomaly.datagen import GenConfig, generate_fleet


def make_config(n_systems=8, dim=2, n_obs=60, anomalies=(3,), shift=3.0, noise_variance=0.01, seed=0,
                nominal_spread=0.0):
    """공칭 파라미터가 모두 같고 이상 시스템만 shift 만큼 떨어진 함대 설정"""
    nominal = np.linspace(1.0, -1.0, dim)
    return GenConfig(
        n_systems=n_systems,
        n_obs=n_obs,
        dim=dim,
        noise_variance=noise_variance,
        nominal_mean=nominal,
        nominal_cov=nominal_spread * np.eye(dim),
        anomal_mean=nominal + shift,
        anomal_cov=np.zeros((dim, dim)),
        regressor_mean=np.zeros(dim),
        regressor_cov=np.eye(dim),
        anomaly_indices=anomalies,
        seed=seed,
    )


def make_fleet(**kwargs) -> FleetDataset:
    return generate_fleet(make_config(**kwargs))


def scalar_fleet(measurements) -> FleetDataset:
    """시스템마다 관측 1개, φ = 1 인 스칼라 함대"""
    return FleetDataset(tuple(SystemDataset(measurements=np.array([y], dtype=float),
                                            regressors=np.array([[1.0]]))
                              for y in measurements))


@pytest.fixture
def planted_fleet() -> FleetDataset:
    """N=8, m=2, 3번 시스템만 이상"""
    return make_fleet()


@pytest.fixture
def two_anomaly_fleet() -> FleetDataset:
    """N=10, m=2, 4번과 9번 시스템이 이상"""
    return make_fleet(n_systems=10, anomalies=(4, 9), seed=3)


@pytest.fixture
def two_system_scalar() -> FleetDataset:
    """y₁ = 1, y₂ = −1, φ = 1"""
    return scalar_fleet([1.0, -1.0])


# 볼록 사각형 꼭짓점: 기하 중앙값(대각선 교점)과 좌표별 중앙값 모두 꼭짓점과 다름
CORNERS = ((0.0, 0.0), (2.0, 0.2), (2.1, 1.9), (-0.1, 2.2))


@pytest.fixture
def corner_fleet() -> FleetDataset:
    """Φ_i = I (2×2), Y_i = 꼭짓점 인 잡음 없는 4개 시스템"""
    return FleetDataset(tuple(SystemDataset(measurements=np.array(corner), regressors=np.eye(2))
                              for corner in CORNERS))
