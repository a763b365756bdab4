"""
함대 이상탐지: 합-노름(그룹 라쏘) 정규화로 공칭 모델에서 벗어난 시스템 찾기
"""
from fleet_anomaly.admm import run_distributed
from fleet_anomaly.baseline import solve_tikhonov, threshold_report
from fleet_anomaly.config import AdmmConfig, FleetAnomalyConfig, SolverConfig
from fleet_anomaly.core import FleetDataset, Hypothesis, Solution, SystemDataset
from fleet_anomaly.datagen import GenConfig, default_paper_config, generate_fleet
from fleet_anomaly.oracle import brute_force_detect
from fleet_anomaly.solver import compute_lambda_max, kkt_residual, solve_group_lasso
from fleet_anomaly.tuning import bic_score, select_lambda_bic, tune_lambda_for_k

__all__ = [
    'AdmmConfig', 'FleetAnomalyConfig', 'SolverConfig', 'FleetDataset', 'Hypothesis', 'Solution',
    'SystemDataset', 'GenConfig', 'default_paper_config', 'generate_fleet', 'brute_force_detect',
    'compute_lambda_max', 'kkt_residual', 'solve_group_lasso', 'run_distributed', 'solve_tikhonov',
    'threshold_report', 'bic_score', 'select_lambda_bic', 'tune_lambda_for_k',
]
