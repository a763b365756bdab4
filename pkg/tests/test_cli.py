"""
명령줄 도구 테스트
"""
import json
import os

import numpy as np
import pandas as pd
import pytest

from conftest import ROOT_DIR, make_config
from fleet_anomaly.cli import (EXIT_FAILURE, EXIT_OK, EXIT_REFUSED, EXIT_USAGE, main,
                               parse_lambda_list)
from fleet_anomaly.dataset_io import read_fleet
from fleet_anomaly.errors import DomainError

SCHEMA_PATH = os.path.join(ROOT_DIR, 'schemas', 'detection_report.schema.json')
JSON_TYPES = {'object': dict, 'array': list, 'string': str, 'boolean': bool, 'null': type(None),
              'integer': int, 'number': (int, float)}


def assert_matches_schema(value, schema, path='$'):
    """리포트가 쓰는 스키마 키워드(type, const, enum, required, items)만 검사"""
    if 'const' in schema:
        assert value == schema['const'], path
    if 'enum' in schema:
        assert value in schema['enum'], path
    if 'type' in schema:
        names = schema['type'] if isinstance(schema['type'], list) else [schema['type']]
        matches = any(isinstance(value, JSON_TYPES[name]) and not (name in ('integer', 'number')
                                                                    and isinstance(value, bool))
                      for name in names)
        assert matches, f"{path}: {value!r} is not {names}"
    if isinstance(value, dict):
        for key in schema.get('required', []):
            assert key in value, f"{path}.{key} missing"
        for key, child in schema.get('properties', {}).items():
            if key in value:
                assert_matches_schema(value[key], child, f"{path}.{key}")
    if isinstance(value, list) and 'items' in schema:
        for index, item in enumerate(value):
            assert_matches_schema(item, schema['items'], f"{path}[{index}]")


@pytest.fixture
def small_dataset(tmp_path):
    config_path = tmp_path / 'small.json'
    config_path.write_text(json.dumps(make_config(seed=5).to_dict()), encoding='utf-8')
    dataset = tmp_path / 'small.bin'
    assert main(['gen', '--config', str(config_path), '--out', str(dataset)]) == EXIT_OK
    return str(dataset)


def test_parse_lambda_list():
    assert parse_lambda_list('10, 100,400') == [10.0, 100.0, 400.0]
    with pytest.raises(DomainError):
        parse_lambda_list('')
    with pytest.raises(DomainError):
        parse_lambda_list('1,abc')


def test_gen_is_deterministic(tmp_path):
    config_path = tmp_path / 'small.json'
    config_path.write_text(json.dumps(make_config().to_dict()), encoding='utf-8')
    first, second = tmp_path / 'a.bin', tmp_path / 'b.bin'
    assert main(['gen', '--config', str(config_path), '--seed', '9', '--out', str(first)]) == EXIT_OK
    assert main(['gen', '--config', str(config_path), '--seed', '9', '--out', str(second),
                 '--csv-dir', str(tmp_path / 'csv')]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert len(os.listdir(tmp_path / 'csv')) == 8

    fleet, header = read_fleet(str(first))
    assert header['seed'] == 9
    assert fleet.truth.anomaly_indices == (3,)


def test_gen_missing_config_is_usage_error(tmp_path):
    assert main(['gen', '--config', str(tmp_path / 'absent.json'), '--out', str(tmp_path / 'x.bin')]) == EXIT_USAGE


def test_detect_missing_dataset_is_usage_error(tmp_path):
    assert main(['detect', str(tmp_path / 'absent.bin'), '--lambda', '1']) == EXIT_USAGE


@pytest.mark.parametrize('arguments, method', [
    (['--method', 'central', '--k', '1'], 'central'),
    (['--method', 'oracle', '--k', '1'], 'oracle'),
    (['--method', 'admm', '--lambda', '100'], 'admm'),
    (['--method', 'tikhonov', '--lambda', '100', '--threshold', '0.5'], 'tikhonov'),
])
def test_detect_writes_schema_conformant_report(small_dataset, tmp_path, arguments, method):
    report_path = tmp_path / f'{method}.json'
    csv_path = tmp_path / f'{method}.csv'
    code = main(['detect', small_dataset, *arguments, '--out-report', str(report_path),
                 '--out-csv', str(csv_path)])
    assert code == EXIT_OK

    report = json.loads(report_path.read_text(encoding='utf-8'))
    with open(SCHEMA_PATH, 'r', encoding='utf-8') as handle:
        assert_matches_schema(report, json.load(handle))
    assert report['method'] == method
    assert report['flagged'] == [3]
    assert report['n_flagged'] == 1
    assert len(report['deviations']) == 8
    assert 'trace' not in report['diagnostics']

    deviations = pd.read_csv(csv_path)
    assert deviations.columns.tolist() == ['system', 'deviation', 'flagged', 'theta_1', 'theta_2']
    assert deviations['flagged'].tolist() == [0, 0, 1, 0, 0, 0, 0, 0]


def test_oracle_report_carries_ranking_and_estimates(small_dataset, tmp_path):
    report_path = tmp_path / 'oracle.json'
    assert main(['detect', small_dataset, '--method', 'oracle', '--k', '1',
                 '--out-report', str(report_path)]) == EXIT_OK
    report = json.loads(report_path.read_text(encoding='utf-8'))
    with open(SCHEMA_PATH, 'r', encoding='utf-8') as handle:
        assert_matches_schema(report, json.load(handle))

    assert report['n_hypotheses'] == 8
    hypotheses = report['hypotheses']
    assert [row['rank'] for row in hypotheses] == list(range(1, 9))
    assert hypotheses[0]['anomaly_set'] == [3]
    costs = [row['cost'] for row in hypotheses]
    assert costs == sorted(costs)
    assert report['objective'] == pytest.approx(costs[0], rel=1e-12)

    # 이상 시스템 3 의 추정값은 공칭값 + 3 근처
    (anomalous,) = report['anomalous_parameters']
    assert anomalous['system'] == 3
    np.testing.assert_allclose(anomalous['theta'], np.array(report['nominal']) + 3.0, atol=0.1)


def test_non_oracle_reports_have_no_ranking(small_dataset, tmp_path):
    report_path = tmp_path / 'central.json'
    assert main(['detect', small_dataset, '--lambda', '50', '--out-report', str(report_path)]) == EXIT_OK
    report = json.loads(report_path.read_text(encoding='utf-8'))
    assert 'hypotheses' not in report
    assert 'anomalous_parameters' not in report


def test_detect_reports_are_byte_identical(small_dataset, tmp_path):
    paths = [tmp_path / 'first.json', tmp_path / 'second.json']
    for path in paths:
        assert main(['detect', small_dataset, '--lambda', '50', '--out-report', str(path)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_admm_trace_csv(small_dataset, tmp_path):
    trace_path = tmp_path / 'trace.csv'
    assert main(['--threads', '2', 'detect', small_dataset, '--method', 'admm', '--lambda', '100',
                 '--transport', 'socket', '--out-trace', str(trace_path)]) == EXIT_OK
    trace = pd.read_csv(trace_path)
    assert trace['iteration'].tolist() == list(range(1, len(trace) + 1))
    assert {'primal_residual', 'dual_residual', 'rho', 'objective'} <= set(trace.columns)


def test_admm_without_lambda_is_usage_error(small_dataset):
    assert main(['detect', small_dataset, '--method', 'admm']) == EXIT_USAGE


def test_oracle_over_cap_is_refused(small_dataset, capsys):
    assert main(['detect', small_dataset, '--method', 'oracle', '--k', '3', '--cap', '10']) == EXIT_REFUSED
    assert '56' in capsys.readouterr().err


def test_non_convergence_exit_code(small_dataset):
    code = main(['detect', small_dataset, '--method', 'admm', '--lambda', '100', '--max-iterations', '1'])
    assert code == 3


def test_compare_writes_summary(small_dataset, tmp_path):
    out_dir = tmp_path / 'compare'
    code = main(['compare', small_dataset, '--lambdas', '50', '--tikhonov-lambdas', '10,100',
                 '--out-dir', str(out_dir), '--excel'])
    assert code == EXIT_OK
    summary = pd.read_csv(out_dir / 'summary.csv')
    assert summary['method'].tolist() == ['central', 'tikhonov', 'tikhonov']
    assert summary['n_flagged'].tolist()[0] == 1
    # 티호노프는 기본 임계값에서 모든 시스템을 판정
    assert summary['n_flagged'].tolist()[1:] == [8, 8]
    assert (out_dir / 'deviations_side_by_side.csv').exists()
    assert (out_dir / 'deviations_group_lasso_lambda_50.csv').exists()
    assert (out_dir / 'comparison.xlsx').exists()


def test_compare_empty_lambda_list_is_usage_error(small_dataset, tmp_path):
    assert main(['compare', small_dataset, '--lambdas', '', '--out-dir', str(tmp_path / 'c')]) == EXIT_USAGE


def test_tune_for_k(small_dataset, tmp_path):
    out_csv = tmp_path / 'tune.csv'
    assert main(['tune', small_dataset, '--k', '1', '--out-csv', str(out_csv)]) == EXIT_OK
    row = pd.read_csv(out_csv).iloc[0]
    assert row['k'] == 1
    assert str(row['flagged']) == '3'


def test_tune_bic_grid(small_dataset, tmp_path):
    out_csv = tmp_path / 'bic.csv'
    assert main(['tune', small_dataset, '--grid-points', '8', '--out-csv', str(out_csv)]) == EXIT_OK
    table = pd.read_csv(out_csv)
    assert len(table) == 8
    assert table['k'].iloc[0] == 0


def test_tune_rejects_target_above_fleet_size(small_dataset):
    assert main(['tune', small_dataset, '--k', '9']) == EXIT_USAGE


def test_all_failed_compare_exits_with_failure(tmp_path):
    config = make_config(n_systems=3, n_obs=1, dim=2, anomalies=())
    config_path = tmp_path / 'degenerate.json'
    config_path.write_text(json.dumps(config.to_dict()), encoding='utf-8')
    dataset = tmp_path / 'degenerate.bin'
    assert main(['gen', '--config', str(config_path), '--out', str(dataset)]) == EXIT_OK
    # Ω=1 < m 이라 모든 블록이 특이
    assert main(['compare', str(dataset), '--lambdas', '0', '--out-dir', str(tmp_path / 'c')]) == EXIT_FAILURE
