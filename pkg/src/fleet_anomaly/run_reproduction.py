#!/usr/bin/env python3
"""
수치 실험 재현 배치 스크립트

사용법:
1. 아래 REPRO_CONFIG 값을 원하는 값으로 수정
2. python src/fleet_anomaly/run_reproduction.py 실행

시드마다 기준 실험 설정으로 함대를 생성하고, 정확히 k개를 판정하도록 λ 를 맞춘 뒤
판정 집합이 실제 이상 집합과 일치하는지 기록한다. ADMM 과 티호노프 비교는 선택.
"""
import os
import sys

if __package__ in (None, ''):
    sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pandas as pd

from fleet_anomaly.admm import run_distributed
from fleet_anomaly.baseline import DEFAULT_THRESHOLD, solve_tikhonov, threshold_report
from fleet_anomaly.config import AdmmConfig, FleetAnomalyConfig, SolverConfig
from fleet_anomaly.datagen import default_paper_config, generate_fleet
from fleet_anomaly.detection_analyzer import DetectionAnalyzer
from fleet_anomaly.errors import FleetAnomalyError
from fleet_anomaly.report_exporter import ExcelReportExporter, write_csv
from fleet_anomaly.tuning import tune_lambda_for_k

# 재현 설정 변수들 (여기를 수정하세요)
REPRO_CONFIG = {
    'seeds': list(range(1, 21)),          # 실험 시드
    'k_target': 3,                        # 판정할 이상 시스템 수
    'p': 2,                               # 편차 노름 (1 또는 2)
    'run_admm': True,                     # 맞춘 λ 에서 분산 ADMM 도 실행
    'tikhonov_lambdas': [10, 100, 400],   # 티호노프 비교 λ (빈 목록이면 생략)
    'threads': None,                      # None 이면 FLEET_THREADS 환경변수
}


def run_seed(seed: int, settings: dict, threads: int, analyzer: DetectionAnalyzer) -> dict:
    """시드 하나에 대한 실험"""
    config = default_paper_config(seed=seed)
    fleet = generate_fleet(config)
    cfg = SolverConfig(lam=0.0, p=settings['p'], threads=threads)

    tuned = tune_lambda_for_k(fleet, settings['k_target'], cfg)
    metrics = analyzer.calculate_metrics(tuned.solution, fleet.truth)
    row = {
        'seed': seed,
        'lambda_max': tuned.lambda_max,
        'lambda': tuned.lam,
        'k': tuned.achieved_k,
        'flagged': ';'.join(str(tag) for tag in tuned.solution.flagged),
        'exact_match': metrics['exact_match'],
        'kkt_residual': tuned.solution.diagnostics.get('kkt_residual'),
        'central_iterations': tuned.solution.diagnostics.get('iterations'),
    }

    if settings['run_admm']:
        try:
            distributed = run_distributed(fleet, tuned.lam, settings['p'], AdmmConfig(threads=threads))
            _, admm_entry = analyzer.compare_solutions([tuned.solution, distributed], fleet.truth).values()
            row.update({
                'admm_iterations': distributed.diagnostics['iterations'],
                'admm_flagged': ';'.join(str(tag) for tag in distributed.flagged),
                'admm_agreement': admm_entry['agreement_with_first'],
                'admm_same_flagged': admm_entry['same_flagged_as_first'],
            })
        except FleetAnomalyError as error:
            row['admm_flagged'] = f'failed: {type(error).__name__}'

    for lam in settings['tikhonov_lambdas']:
        baseline = solve_tikhonov(fleet, lam)
        report = threshold_report(baseline, DEFAULT_THRESHOLD)
        row[f'tikhonov_{lam:g}_min_deviation'] = float(baseline.deviations.min())
        row[f'tikhonov_{lam:g}_n_flagged'] = len(report.flagged)
    return row


def run_reproduction():
    """재현 배치 실행"""
    settings = REPRO_CONFIG
    config = FleetAnomalyConfig(threads=settings['threads'])
    config.set_result_kind('reproduction')
    session_dir = config.create_session_directory(f"reference_k{settings['k_target']}_p{settings['p']}")
    analyzer = DetectionAnalyzer()

    print("=== 수치 실험 재현 배치 ===")
    print(f"시드: {settings['seeds'][0]} ~ {settings['seeds'][-1]} ({len(settings['seeds'])}개)")
    print(f"목표 판정 수: {settings['k_target']}, p={settings['p']}")
    print(f"결과 저장: {session_dir}")

    rows = []
    for index, seed in enumerate(settings['seeds'], 1):
        print(f"\n[{index}/{len(settings['seeds'])}] 시드 {seed}")
        try:
            row = run_seed(seed, settings, config.threads, analyzer)
        except FleetAnomalyError as error:
            print(f"❌ 실패: {error}")
            rows.append({'seed': seed, 'exact_match': False, 'flagged': f'failed: {type(error).__name__}'})
            continue
        mark = '✅' if row['exact_match'] else '❌'
        print(f"{mark} λ={row['lambda']:.6g} 판정: {row['flagged'] or '없음'}")
        rows.append(row)

    results = pd.DataFrame(rows)
    success_rate = analyzer.success_rate(results['exact_match'])
    print(f"\n📊 정확 일치 비율: {success_rate*100:.1f}% ({int(results['exact_match'].sum())}/{len(results)})")

    csv_path = write_csv(results, os.path.join(session_dir, 'reproduction.csv'))
    excel_path = ExcelReportExporter().export(
        os.path.join(session_dir, 'reproduction.xlsx'),
        {'시드별 결과': results},
        settings={**settings, 'success_rate': success_rate},
    )
    print(f"📄 CSV: {csv_path}")
    print(f"📄 Excel: {excel_path}")
    return results


if __name__ == '__main__':
    run_reproduction()
