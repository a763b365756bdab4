#!/usr/bin/env python3
"""
함대 이상탐지 명령줄 도구

사용법:
    python src/fleet_anomaly/cli.py gen --paper-defaults --seed 1 --out fleet.bin
    python src/fleet_anomaly/cli.py detect fleet.bin --method central --k 3 --out-report report.json
    python src/fleet_anomaly/cli.py detect fleet.bin --method admm --lambda 5000 --out-trace trace.csv
    python src/fleet_anomaly/cli.py compare fleet.bin --lambdas 10,100,400 --out-dir compare/
    python src/fleet_anomaly/cli.py tune fleet.bin --grid-points 20 --out-csv tuning.csv

종료 코드: 0 정상, 1 기타 오류, 2 사용법/설정 오류, 3 미수렴, 4 열거 상한 거부
"""
import argparse
import os
import sys
from typing import List, Optional, Sequence

import pandas as pd

if __package__ in (None, ''):
    # 스크립트로 실행할 때 src 디렉토리를 경로에 추가
    sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fleet_anomaly.baseline import DEFAULT_THRESHOLD, threshold_report
from fleet_anomaly.config import SolverConfig, resolve_threads
from fleet_anomaly.core import binomial_count
from fleet_anomaly.dataset_io import export_system_csv, read_fleet, write_fleet
from fleet_anomaly.datagen import GenConfig, default_paper_config, generate_fleet
from fleet_anomaly.detection_analyzer import DetectionAnalyzer
from fleet_anomaly.errors import DomainError, EnumerationCapError, FleetAnomalyError, NonConvergenceError
from fleet_anomaly.oracle import DEFAULT_ENUMERATION_CAP
from fleet_anomaly.report_exporter import (ExcelReportExporter, build_report, comparison_frame,
                                           solutions_side_by_side, write_csv, write_deviation_csv,
                                           write_json, write_trace_csv)
from fleet_anomaly.solver import compute_lambda_max
from fleet_anomaly.solver_factory import DetectionRequest, DetectorFactory
from fleet_anomaly.tuning import log_lambda_grid, select_lambda_bic, tune_lambda_for_k

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NON_CONVERGENCE = 3
EXIT_REFUSED = 4


def parse_lambda_list(text: str) -> List[float]:
    """쉼표로 구분한 λ 목록"""
    try:
        values = [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise DomainError(f"λ 목록을 해석할 수 없습니다: {text}")
    if not values:
        raise DomainError("λ 목록이 비어 있습니다")
    if any(value < 0 for value in values):
        raise DomainError(f"λ 는 0 이상이어야 합니다: {text}")
    return values


def cmd_gen(args) -> int:
    """합성 함대 데이터 파일 생성"""
    if args.paper_defaults:
        config = default_paper_config(seed=args.seed if args.seed is not None else 0)
    elif args.config:
        config = GenConfig.from_json_file(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
    else:
        raise DomainError("--config 또는 --paper-defaults 중 하나가 필요합니다")

    print("[1] 함대 데이터 생성 중...")
    fleet = generate_fleet(config)
    write_fleet(fleet, args.out, config)
    if args.csv_dir:
        export_system_csv(fleet, args.csv_dir)

    print(f"✅ 저장 완료: {args.out}")
    print(f"설정 해시: {config.config_hash()}")
    print(f"시스템 수: {fleet.n_systems}, 차원: {fleet.dim}, 관측 수: {config.n_obs}, 시드: {config.seed}")
    anomalies = ', '.join(str(tag) for tag in config.anomaly_indices) or '없음'
    print(f"실제 이상 시스템: {anomalies}")
    return EXIT_OK


def cmd_detect(args) -> int:
    """선택한 방법으로 이상 시스템 판정"""
    fleet, header = read_fleet(args.dataset)
    request = DetectionRequest(lam=args.lam, k=args.k, p=args.p, threads=args.threads, ridge=args.ridge,
                               transport=args.transport, threshold=args.threshold, cap=args.cap,
                               max_iterations=args.max_iterations, verbose=args.verbose)
    detector = DetectorFactory.create_detector(args.method)

    print(f"[1] {args.method} 방법으로 탐지 중... (N={fleet.n_systems}, m={fleet.dim})")
    if args.method == 'oracle' and args.k is not None:
        print(f"    가설 수: {binomial_count(fleet.n_systems, args.k):,}")
    solution = detector.detect(fleet, request)

    analyzer = DetectionAnalyzer()
    print(analyzer.generate_summary(solution, fleet.truth))

    if args.out_report:
        write_json(build_report(fleet, solution, header, k=args.k, extra=detector.report_extra()),
                   args.out_report)
        print(f"📄 리포트: {args.out_report}")
    if args.out_csv:
        write_deviation_csv(solution, args.out_csv)
        print(f"📊 편차 CSV: {args.out_csv}")
    if args.out_trace:
        write_trace_csv(solution, args.out_trace)
        print(f"📈 반복 기록 CSV: {args.out_trace}")
    if args.chart_dir:
        from fleet_anomaly.chart_generator import ChartGenerator
        threshold = args.threshold if args.method == 'tikhonov' else None
        charts = ChartGenerator(args.chart_dir).generate_all_charts([solution], [threshold])
        for path in charts.values():
            print(f"🖼️ 차트: {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    """합-노름과 티호노프를 λ 목록에 걸쳐 비교"""
    fleet, _ = read_fleet(args.dataset)
    lambdas = parse_lambda_list(args.lambdas)
    tikhonov_lambdas = parse_lambda_list(args.tikhonov_lambdas) if args.tikhonov_lambdas else lambdas
    os.makedirs(args.out_dir, exist_ok=True)

    runs = [('central', lam) for lam in lambdas] + [('tikhonov', lam) for lam in tikhonov_lambdas]
    rows, solutions, thresholds = [], [], []
    for index, (method, lam) in enumerate(runs, 1):
        print(f"[{index}/{len(runs)}] {method} λ={lam:g}")
        request = DetectionRequest(lam=lam, p=args.p, threads=args.threads, threshold=args.threshold)
        try:
            solution = DetectorFactory.create_detector(method).detect(fleet, request)
        except FleetAnomalyError as error:
            print(f"❌ 실패: {error}")
            rows.append({'method': method, 'lambda': lam, 'n_flagged': None, 'flagged': '',
                         'min_deviation': None, 'margin_ratio': None, 'status': f'failed: {type(error).__name__}'})
            continue
        threshold = args.threshold if method == 'tikhonov' else solution.support_tolerance
        margin = threshold_report(solution, threshold)
        label = 'group_lasso' if method == 'central' else method
        write_deviation_csv(solution, os.path.join(args.out_dir, f'deviations_{label}_lambda_{lam:g}.csv'))
        rows.append({'method': method, 'lambda': lam, 'n_flagged': len(margin.flagged),
                     'flagged': ';'.join(str(tag) for tag in margin.flagged),
                     'min_deviation': float(solution.deviations.min()),
                     'margin_ratio': margin.margin_ratio, 'status': 'ok'})
        solutions.append(solution)
        thresholds.append(args.threshold if method == 'tikhonov' else None)

    summary = comparison_frame(rows)
    write_csv(summary, os.path.join(args.out_dir, 'summary.csv'))
    if solutions:
        write_csv(solutions_side_by_side(solutions), os.path.join(args.out_dir, 'deviations_side_by_side.csv'))
    print(summary.to_string(index=False))

    if args.svg and solutions:
        from fleet_anomaly.chart_generator import ChartGenerator
        ChartGenerator(os.path.join(args.out_dir, 'charts')).generate_all_charts(solutions, thresholds)
    if args.excel:
        ExcelReportExporter().export(os.path.join(args.out_dir, 'comparison.xlsx'),
                                     {'비교 요약': summary, '시스템별 편차': solutions_side_by_side(solutions)},
                                     settings={'dataset': os.path.basename(args.dataset), 'p': args.p,
                                               'threshold': args.threshold})

    if not solutions:
        print("❌ 모든 실행이 실패했습니다")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_tune(args) -> int:
    """목표 개수 이분 탐색 또는 BIC 격자 탐색"""
    fleet, _ = read_fleet(args.dataset)
    cfg = SolverConfig(lam=0.0, p=args.p, threads=args.threads, verbose=args.verbose)

    if args.k is not None:
        print(f"[1] 정확히 {args.k}개를 판정하는 λ 탐색 중...")
        result = tune_lambda_for_k(fleet, args.k, cfg)
        print(f"λ_max = {result.lambda_max:.10g}")
        print(f"✅ λ = {result.lam:.10g}, 판정 {result.achieved_k}개: "
              f"{', '.join(str(tag) for tag in result.solution.flagged) or '없음'}")
        if args.out_csv:
            write_csv(pd.DataFrame([{'lambda': result.lam, 'k_target': result.k_target,
                                     'k': result.achieved_k,
                                     'flagged': ';'.join(str(tag) for tag in result.solution.flagged)}]),
                      args.out_csv)
        return EXIT_OK

    lambda_max = compute_lambda_max(fleet, args.p)
    grid = parse_lambda_list(args.lambdas) if args.lambdas else log_lambda_grid(lambda_max, args.grid_points,
                                                                                 args.grid_ratio)
    print(f"[1] BIC 격자 탐색 중... (λ_max = {lambda_max:.10g}, 격자 {len(grid)}개)")
    best_lambda, table = select_lambda_bic(fleet, grid, cfg)
    print(table.to_string(index=False))
    print(f"✅ BIC 최소 λ = {best_lambda:.10g}")
    if args.out_csv:
        write_csv(table, args.out_csv)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='fleet_anomaly', description='함대 이상탐지 도구')
    parser.add_argument('--threads', type=int, default=None,
                        help='스레드 수 (미지정 시 FLEET_THREADS 환경변수, 기본 1)')
    parser.add_argument('--verbose', action='store_true', help='반복 진행 상황 출력')
    subparsers = parser.add_subparsers(dest='command', required=True)

    gen = subparsers.add_parser('gen', help='합성 함대 데이터 생성')
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', help='GenConfig JSON 파일')
    source.add_argument('--paper-defaults', action='store_true', help='기준 수치 실험 설정 사용')
    gen.add_argument('--seed', type=int, default=None)
    gen.add_argument('--out', required=True, help='출력 데이터 파일')
    gen.add_argument('--csv-dir', default=None, help='시스템별 CSV 출력 디렉토리')
    gen.set_defaults(handler=cmd_gen)

    detect = subparsers.add_parser('detect', help='이상 시스템 탐지')
    detect.add_argument('dataset')
    detect.add_argument('--method', choices=DetectorFactory.SUPPORTED_METHODS, default='central')
    detect.add_argument('--lambda', dest='lam', type=float, default=None)
    detect.add_argument('--k', type=int, default=None)
    detect.add_argument('--p', type=int, choices=(1, 2), default=2)
    detect.add_argument('--ridge', action='store_true', help='특이 그람 행렬에 작은 릿지 섭동 허용')
    detect.add_argument('--transport', choices=('in_process', 'socket'), default='in_process')
    detect.add_argument('--threshold', type=float, default=DEFAULT_THRESHOLD, help='tikhonov 판정 임계값')
    detect.add_argument('--cap', type=int, default=DEFAULT_ENUMERATION_CAP, help='oracle 가설 수 상한')
    detect.add_argument('--max-iterations', type=int, default=None)
    detect.add_argument('--out-report', default=None)
    detect.add_argument('--out-csv', default=None)
    detect.add_argument('--out-trace', default=None)
    detect.add_argument('--chart-dir', default=None)
    detect.set_defaults(handler=cmd_detect)

    compare = subparsers.add_parser('compare', help='합-노름과 티호노프 비교')
    compare.add_argument('dataset')
    compare.add_argument('--lambdas', required=True, help='쉼표 구분 λ 목록')
    compare.add_argument('--tikhonov-lambdas', default=None, help='티호노프용 λ 목록 (기본: --lambdas)')
    compare.add_argument('--p', type=int, choices=(1, 2), default=2)
    compare.add_argument('--threshold', type=float, default=DEFAULT_THRESHOLD)
    compare.add_argument('--out-dir', required=True)
    compare.add_argument('--svg', action='store_true', help='편차 막대 차트(SVG) 생성')
    compare.add_argument('--excel', action='store_true', help='Excel 요약 생성')
    compare.set_defaults(handler=cmd_compare)

    tune = subparsers.add_parser('tune', help='λ 선택')
    tune.add_argument('dataset')
    tune.add_argument('--k', type=int, default=None, help='목표 판정 개수 (이분 탐색)')
    tune.add_argument('--lambdas', default=None, help='쉼표 구분 λ 격자')
    tune.add_argument('--grid-points', type=int, default=20)
    tune.add_argument('--grid-ratio', type=float, default=1e-3)
    tune.add_argument('--p', type=int, choices=(1, 2), default=2)
    tune.add_argument('--out-csv', default=None)
    tune.set_defaults(handler=cmd_tune)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.threads = resolve_threads(args.threads)
        return args.handler(args)
    except EnumerationCapError as error:
        print(f"❌ {error}", file=sys.stderr)
        return EXIT_REFUSED
    except NonConvergenceError as error:
        print(f"❌ 수렴 실패: {error}", file=sys.stderr)
        return EXIT_NON_CONVERGENCE
    except (DomainError, FileNotFoundError, IsADirectoryError) as error:
        print(f"❌ 설정 오류: {error}", file=sys.stderr)
        return EXIT_USAGE
    except FleetAnomalyError as error:
        print(f"❌ 오류: {error}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
