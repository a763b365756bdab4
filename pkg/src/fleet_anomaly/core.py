"""
공통 도메인 타입과 최소제곱 기본 연산 모듈

시스템 번호(태그)는 1부터 시작하고, 배열 위치는 0부터 시작한다.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.special import comb

from fleet_anomaly.errors import DomainError, SingularityError


@dataclass(frozen=True, eq=False)
class SystemDataset:
    """단일 시스템의 측정값 벡터 Y_i 와 회귀 행렬 Φ_i"""
    
    measurements: np.ndarray
    regressors: np.ndarray
    
    def __post_init__(self):
        measurements = np.asarray(self.measurements, dtype=np.float64)
        regressors = np.asarray(self.regressors, dtype=np.float64)
        if regressors.ndim == 1:
            regressors = regressors.reshape(-1, 1)
        if measurements.ndim != 1:
            raise DomainError(f"측정값은 1차원 벡터여야 합니다: shape={measurements.shape}")
        if regressors.ndim != 2:
            raise DomainError(f"회귀 행렬은 2차원이어야 합니다: shape={regressors.shape}")
        if regressors.shape[0] != measurements.shape[0]:
            raise DomainError(
                f"회귀 행렬 행 수({regressors.shape[0]})와 측정값 길이({measurements.shape[0]})가 다릅니다"
            )
        if measurements.shape[0] < 1 or regressors.shape[1] < 1:
            raise DomainError("관측 수와 파라미터 차원은 1 이상이어야 합니다")
        if not (np.all(np.isfinite(measurements)) and np.all(np.isfinite(regressors))):
            raise DomainError("측정값과 회귀 행렬에 유한하지 않은 값이 있습니다")
        object.__setattr__(self, 'measurements', measurements)
        object.__setattr__(self, 'regressors', regressors)
    
    @property
    def n_obs(self) -> int:
        return self.regressors.shape[0]
    
    @property
    def dim(self) -> int:
        return self.regressors.shape[1]
    
    @cached_property
    def gram(self) -> np.ndarray:
        """Φ_iᵀΦ_i"""
        return self.regressors.T @ self.regressors
    
    @cached_property
    def moment(self) -> np.ndarray:
        """Φ_iᵀY_i"""
        return self.regressors.T @ self.measurements
    
    @cached_property
    def energy(self) -> float:
        """Y_iᵀY_i"""
        return float(self.measurements @ self.measurements)


@dataclass(frozen=True, eq=False)
class FleetTruth:
    """합성 데이터의 정답 기록"""
    
    nominal_params: np.ndarray
    anomaly_indices: Tuple[int, ...]
    noise_variance: float
    
    def __post_init__(self):
        object.__setattr__(self, 'nominal_params', np.asarray(self.nominal_params, dtype=np.float64))
        object.__setattr__(self, 'anomaly_indices', tuple(sorted(int(i) for i in self.anomaly_indices)))


@dataclass(frozen=True, eq=False)
class FleetDataset:
    """N개 시스템 데이터의 순서 있는 묶음"""
    
    systems: Tuple[SystemDataset, ...]
    truth: Optional[FleetTruth] = None
    
    def __post_init__(self):
        systems = tuple(self.systems)
        if len(systems) < 1:
            raise DomainError("시스템이 최소 1개 필요합니다")
        dims = {system.dim for system in systems}
        if len(dims) != 1:
            raise DomainError(f"모든 시스템의 파라미터 차원이 같아야 합니다: {sorted(dims)}")
        object.__setattr__(self, 'systems', systems)
        if self.truth is not None:
            n_systems = len(systems)
            for index in self.truth.anomaly_indices:
                if not 1 <= index <= n_systems:
                    raise DomainError(f"정답 이상 시스템 번호가 범위를 벗어났습니다: {index}")
            if self.truth.nominal_params.shape != (n_systems, self.dim):
                raise DomainError("정답 파라미터 행렬 크기가 데이터와 맞지 않습니다")
    
    @property
    def n_systems(self) -> int:
        return len(self.systems)
    
    @property
    def dim(self) -> int:
        return self.systems[0].dim
    
    @property
    def total_observations(self) -> int:
        return sum(system.n_obs for system in self.systems)
    
    @cached_property
    def grams(self) -> np.ndarray:
        """시스템별 Φ_iᵀΦ_i (N, m, m)"""
        return np.stack([system.gram for system in self.systems])
    
    @cached_property
    def moments(self) -> np.ndarray:
        """시스템별 Φ_iᵀY_i (N, m)"""
        return np.stack([system.moment for system in self.systems])
    
    @cached_property
    def energies(self) -> np.ndarray:
        """시스템별 Y_iᵀY_i (N,)"""
        return np.array([system.energy for system in self.systems])
    
    def subset(self, tags: Sequence[int]) -> "FleetDataset":
        """지정 번호(1부터)의 시스템만 남긴 데이터"""
        return FleetDataset(tuple(self.systems[tag - 1] for tag in tags))
    
    def permuted(self, order: Sequence[int]) -> "FleetDataset":
        """order[new_position] = 기존 번호(1부터) 순서로 재배열"""
        order = [int(tag) for tag in order]
        if sorted(order) != list(range(1, self.n_systems + 1)):
            raise DomainError("재배열 순서는 1..N 의 순열이어야 합니다")
        truth = None
        if self.truth is not None:
            new_tag = {old: new for new, old in enumerate(order, 1)}
            truth = FleetTruth(
                nominal_params=self.truth.nominal_params[[tag - 1 for tag in order]],
                anomaly_indices=tuple(new_tag[tag] for tag in self.truth.anomaly_indices),
                noise_variance=self.truth.noise_variance,
            )
        return FleetDataset(tuple(self.systems[tag - 1] for tag in order), truth)


@dataclass(frozen=True)
class Hypothesis:
    """이상 시스템으로 가정한 번호 집합 γ"""
    
    anomaly_set: Tuple[int, ...] = ()
    
    def __post_init__(self):
        values = tuple(int(i) for i in self.anomaly_set)
        if len(set(values)) != len(values):
            raise DomainError(f"가설의 시스템 번호가 중복되었습니다: {values}")
        object.__setattr__(self, 'anomaly_set', tuple(sorted(values)))
    
    @property
    def k(self) -> int:
        return len(self.anomaly_set)
    
    def validate(self, n_systems: int):
        """번호 범위 검사"""
        for index in self.anomaly_set:
            if not 1 <= index <= n_systems:
                raise DomainError(f"가설 번호 {index}가 1..{n_systems} 범위를 벗어났습니다")


def deviation_norms(per_system: np.ndarray, nominal: np.ndarray, p: int) -> np.ndarray:
    """‖θ̂_i − θ̂‖_p (N,)"""
    per_system = np.asarray(per_system, dtype=np.float64)
    nominal = np.asarray(nominal, dtype=np.float64)
    return np.linalg.norm(per_system - nominal[np.newaxis, :], ord=p, axis=1)


def support_from_deviations(deviations: np.ndarray, support_tolerance: float) -> Tuple[int, ...]:
    """임계값을 넘는 편차의 시스템 번호(1부터)"""
    return tuple(int(i) + 1 for i in np.flatnonzero(np.asarray(deviations) > support_tolerance))


@dataclass(eq=False)
class Solution:
    """추정 결과: 공칭 파라미터, 시스템별 파라미터, 편차 노름, 이상 판정 집합"""
    
    nominal: np.ndarray
    per_system: np.ndarray
    deviations: np.ndarray
    flagged: Tuple[int, ...]
    objective: float
    p: int
    support_tolerance: float
    method: str = 'central'
    lam: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    
    @classmethod
    def build(cls, nominal: np.ndarray, per_system: np.ndarray, p: int, support_tolerance: float,
              objective: float, method: str, lam: Optional[float] = None,
              diagnostics: Optional[Dict[str, Any]] = None) -> "Solution":
        """편차와 판정 집합을 다시 계산해서 결과 생성"""
        nominal = np.array(nominal, dtype=np.float64)
        per_system = np.array(per_system, dtype=np.float64)
        deviations = deviation_norms(per_system, nominal, p)
        flagged = support_from_deviations(deviations, support_tolerance)
        objective = float(objective)
        if not np.isfinite(objective):
            raise DomainError(f"목적함수 값이 유한하지 않습니다: {objective}")
        return cls(nominal=nominal, per_system=per_system, deviations=deviations, flagged=flagged,
                   objective=objective, p=p, support_tolerance=float(support_tolerance),
                   method=method, lam=lam, diagnostics=dict(diagnostics or {}))
    
    @property
    def n_systems(self) -> int:
        return self.per_system.shape[0]
    
    def is_consistent(self) -> bool:
        """저장된 편차/판정 집합이 파라미터에서 그대로 재계산되는지 확인"""
        deviations = deviation_norms(self.per_system, self.nominal, self.p)
        flagged = support_from_deviations(deviations, self.support_tolerance)
        return bool(np.array_equal(deviations, self.deviations)) and flagged == self.flagged
    
    def to_dict(self) -> Dict[str, Any]:
        """JSON 직렬화용 사전"""
        return {
            'method': self.method,
            'lambda': self.lam,
            'p': self.p,
            'nominal': self.nominal.tolist(),
            'per_system': self.per_system.tolist(),
            'deviations': self.deviations.tolist(),
            'flagged': list(self.flagged),
            'objective': self.objective,
            'support_tolerance': self.support_tolerance,
            'diagnostics': self.diagnostics,
        }
    
    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "Solution":
        return cls.build(
            nominal=np.asarray(values['nominal']),
            per_system=np.asarray(values['per_system']),
            p=int(values['p']),
            support_tolerance=float(values['support_tolerance']),
            objective=float(values['objective']),
            method=values.get('method', 'central'),
            lam=values.get('lambda'),
            diagnostics=values.get('diagnostics'),
        )


@dataclass(eq=False)
class InformativityReport:
    """원소별 검출 가능성 보고서"""
    
    detectable: np.ndarray
    pooled_rank: int
    dimension: int
    
    @property
    def pooled_full_rank(self) -> bool:
        return self.pooled_rank == self.dimension
    
    @property
    def undetectable(self) -> List[Tuple[int, int]]:
        """검출 불가능한 (시스템 번호, 원소 번호) 목록 (둘 다 1부터)"""
        rows, cols = np.nonzero(~self.detectable)
        return [(int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)]
    
    def to_dict(self) -> Dict[str, Any]:
        return {
            'pooled_rank': self.pooled_rank,
            'dimension': self.dimension,
            'pooled_full_rank': self.pooled_full_rank,
            'undetectable': [list(pair) for pair in self.undetectable],
        }


def binomial_count(n: int, k: int) -> int:
    """N개 시스템에서 k개를 고르는 가설 수 C(N,k) (정확한 정수)"""
    if isinstance(n, bool) or isinstance(k, bool) or int(n) != n or int(k) != k:
        raise DomainError(f"정수 입력이 필요합니다: N={n}, k={k}")
    n, k = int(n), int(k)
    if n < 1 or k < 0:
        raise DomainError(f"N은 1 이상, k는 0 이상이어야 합니다: N={n}, k={k}")
    if k > n:
        raise DomainError(f"k({k})가 N({n})보다 클 수 없습니다")
    return int(comb(n, k, exact=True))


def _as_dataset_list(data: Union[SystemDataset, FleetDataset, Sequence[SystemDataset]]) -> List[SystemDataset]:
    if isinstance(data, SystemDataset):
        return [data]
    if isinstance(data, FleetDataset):
        return list(data.systems)
    datasets = list(data)
    if not datasets:
        raise DomainError("최소제곱에 사용할 데이터가 없습니다")
    return datasets


def ridge_epsilon(gram: np.ndarray) -> float:
    """릿지 대체 경로의 고정 섭동 ε = 1e-10·trace(G)/m"""
    return 1e-10 * float(np.trace(gram)) / gram.shape[0]


def solve_normal_equations(gram: np.ndarray, moment: np.ndarray, ridge: bool = False,
                           subproblem: Optional[str] = None) -> np.ndarray:
    """정규방정식 Gθ = b 풀이 (rank 부족 시 SingularityError, ridge=True 면 섭동 후 풀이)"""
    gram = np.asarray(gram, dtype=np.float64)
    dimension = gram.shape[0]
    rank = int(np.linalg.matrix_rank(gram, hermitian=True))
    if rank < dimension:
        if not ridge:
            raise SingularityError("그람 행렬이 특이합니다", rank=rank, dimension=dimension,
                                   subproblem=subproblem)
        gram = gram + ridge_epsilon(gram) * np.eye(dimension)
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SingularityError("그람 행렬의 촐레스키 분해에 실패했습니다", rank=rank,
                               dimension=dimension, subproblem=subproblem)
    return linalg.cho_solve(factor, moment, check_finite=False)


def least_squares(data: Union[SystemDataset, FleetDataset, Sequence[SystemDataset]],
                  ridge: bool = False) -> np.ndarray:
    """쌓은 데이터의 잔차제곱합을 최소화하는 θ"""
    datasets = _as_dataset_list(data)
    gram = sum(dataset.gram for dataset in datasets)
    moment = sum(dataset.moment for dataset in datasets)
    return solve_normal_equations(gram, moment, ridge=ridge)


def residual_sse(data: SystemDataset, theta: np.ndarray) -> float:
    """Σ_t (y(t) − φᵀ(t)θ)²"""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (data.dim,):
        raise DomainError(f"θ 차원({theta.shape})이 회귀 차원({data.dim})과 다릅니다")
    residual = data.measurements - data.regressors @ theta
    return float(residual @ residual)


def group_lasso_objective(fleet: FleetDataset, nominal: np.ndarray, per_system: np.ndarray,
                          lam: float, p: int) -> float:
    """Σ‖Y_i − Φ_iθ_i‖² + λΣ‖θ − θ_i‖_p"""
    sse = sum(residual_sse(system, per_system[i]) for i, system in enumerate(fleet.systems))
    penalty = float(np.sum(deviation_norms(per_system, nominal, p)))
    return sse + lam * penalty


def total_sse(fleet: FleetDataset, per_system: np.ndarray) -> float:
    """시스템별 파라미터에서의 전체 잔차제곱합"""
    return sum(residual_sse(system, per_system[i]) for i, system in enumerate(fleet.systems))


def informativity_check(fleet: FleetDataset) -> InformativityReport:
    """원소 q의 편차 검출 가능성 점검

    φ_iᵀ(t₁)Qφ_j(t₂) = φ_i,q(t₁)φ_j,q(t₂) 이므로, Φ_i 의 q열이 0이거나
    다른 모든 시스템의 q열이 0이면 원소 q의 편차는 검출할 수 없다.
    """
    column_active = np.stack([np.any(system.regressors != 0.0, axis=0) for system in fleet.systems])
    active_count = column_active.sum(axis=0)
    # 자기 자신을 제외한 다른 시스템 중 q열이 0이 아닌 시스템 수
    others_active = active_count[np.newaxis, :] - column_active.astype(int)
    detectable = column_active & (others_active > 0)
    stacked = np.vstack([system.regressors for system in fleet.systems])
    pooled_rank = int(np.linalg.matrix_rank(stacked))
    return InformativityReport(detectable=detectable, pooled_rank=pooled_rank, dimension=fleet.dim)
