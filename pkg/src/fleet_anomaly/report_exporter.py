"""
탐지 리포트 출력 모듈 (JSON / CSV / Excel)

JSON 은 키 정렬, 실행 시간 필드 없음. CSV 실수는 유효숫자 17자리.
"""
import json
import math
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import openpyxl
import pandas as pd
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

from fleet_anomaly.core import FleetDataset, Solution, informativity_check

REPORT_FORMAT = "fleet_anomaly.detection_report"
REPORT_VERSION = 1
FLOAT_FORMAT = '%.17g'
# 리포트에 싣지 않는 대용량 진단 항목 (반복 기록은 별도 CSV)
BULKY_DIAGNOSTICS = ('trace', 'objective_history')


def _json_safe(value: Any) -> Any:
    """numpy 타입과 비유한 실수를 JSON 호환 값으로 변환"""
    if isinstance(value, dict):
        return {str(key): _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def build_report(fleet: FleetDataset, solution: Solution, header: Optional[Dict[str, Any]] = None,
                 k: Optional[int] = None, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """탐지 리포트 사전 생성"""
    diagnostics = {key: value for key, value in solution.diagnostics.items() if key not in BULKY_DIAGNOSTICS}
    header = header or {}
    report = {
        'format': REPORT_FORMAT,
        'version': REPORT_VERSION,
        'dataset': {
            'n_systems': fleet.n_systems,
            'dim': fleet.dim,
            'total_observations': fleet.total_observations,
            'config_hash': header.get('config_hash'),
            'seed': header.get('seed'),
        },
        'method': solution.method,
        'lambda': solution.lam,
        'p': solution.p,
        'k': k,
        'flagged': list(solution.flagged),
        'n_flagged': len(solution.flagged),
        'nominal': solution.nominal,
        'deviations': solution.deviations,
        'objective': solution.objective,
        'support_tolerance': solution.support_tolerance,
        'diagnostics': diagnostics,
        'informativity': informativity_check(fleet).to_dict(),
    }
    if extra:
        report.update(extra)
    return _json_safe(report)


def write_json(values: Dict[str, Any], path: str) -> str:
    """정렬된 키, 결정적 서식의 JSON 저장"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(_json_safe(values), handle, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
        handle.write('\n')
    return path


def deviation_frame(solution: Solution) -> pd.DataFrame:
    """시스템별 편차 표 (system, deviation, flagged, theta_1..theta_m)"""
    frame = pd.DataFrame({
        'system': np.arange(1, solution.n_systems + 1),
        'deviation': solution.deviations,
        'flagged': [int(tag in solution.flagged) for tag in range(1, solution.n_systems + 1)],
    })
    for q in range(solution.per_system.shape[1]):
        frame[f'theta_{q + 1}'] = solution.per_system[:, q]
    return frame


def write_csv(frame: pd.DataFrame, path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def write_deviation_csv(solution: Solution, path: str) -> str:
    return write_csv(deviation_frame(solution), path)


def write_trace_csv(solution: Solution, path: str) -> str:
    """ADMM 반복 기록 CSV (iteration, primal_residual, dual_residual, rho, objective, ...)"""
    return write_csv(pd.DataFrame(solution.diagnostics.get('trace', [])), path)


class ExcelReportExporter:
    """비교/재현 결과 Excel 출력 클래스"""

    HEADER_FILL = PatternFill(start_color="DDDDDD", end_color="DDDDDD", fill_type="solid")
    COMMON_FILL = PatternFill(start_color="F0F0F0", end_color="F0F0F0", fill_type="solid")
    GROUP_LASSO_FILL = PatternFill(start_color="E6F3FF", end_color="E6F3FF", fill_type="solid")
    TIKHONOV_FILL = PatternFill(start_color="F0FFF0", end_color="F0FFF0", fill_type="solid")
    MISMATCH_FILL = PatternFill(start_color="FCE4D6", end_color="FCE4D6", fill_type="solid")
    THIN_BORDER = Border(left=Side(style='thin'), right=Side(style='thin'),
                         top=Side(style='thin'), bottom=Side(style='thin'))

    def __init__(self):
        self.workbook = None

    def export(self, filepath: str, sheets: Dict[str, pd.DataFrame],
               settings: Optional[Dict[str, Any]] = None) -> str:
        """시트 이름 → 표 사전을 워크북으로 저장 (설정 시트가 있으면 맨 앞)"""
        self.workbook = openpyxl.Workbook()
        self.workbook.remove(self.workbook.active)

        if settings:
            self._create_settings_sheet(settings)
        for title, frame in sheets.items():
            self._create_table_sheet(title, frame)

        directory = os.path.dirname(os.path.abspath(filepath))
        os.makedirs(directory, exist_ok=True)
        self.workbook.save(filepath)
        return filepath

    def _create_settings_sheet(self, settings: Dict[str, Any]):
        """실행 설정 시트"""
        ws = self.workbook.create_sheet("실행 설정")
        ws.append(['항목', '값'])
        for key, value in settings.items():
            if isinstance(value, (list, tuple, dict)):
                value = json.dumps(_json_safe(value), ensure_ascii=False)
            ws.append([key, value])
        self._apply_cell_formatting(ws)

    def _create_table_sheet(self, title: str, frame: pd.DataFrame):
        ws = self.workbook.create_sheet(title[:31])
        ws.append([str(column) for column in frame.columns])
        for row in frame.itertuples(index=False):
            ws.append([self._cell_value(value) for value in row])
        self._apply_cell_formatting(ws)

    @staticmethod
    def _cell_value(value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return ';'.join(str(item) for item in value)
        if isinstance(value, (np.integer,)):
            return int(value)
        if isinstance(value, (np.floating, float)):
            value = float(value)
            if math.isnan(value):
                return None
            if math.isinf(value):
                return 'inf' if value > 0 else '-inf'
            return value
        if isinstance(value, (np.bool_, bool)):
            return '예' if value else '아니오'
        return value

    def _apply_cell_formatting(self, ws):
        """셀 서식 적용"""
        # 머리행 고정
        ws.freeze_panes = 'A2'

        for column in ws.columns:
            column_letter = column[0].column_letter
            header_value = str(column[0].value) if column[0].value else ""

            # 컬럼 유형별 색상 결정
            if 'tikhonov' in header_value.lower() or '티호노프' in header_value:
                column_color = self.TIKHONOV_FILL
            elif 'group_lasso' in header_value.lower() or '그룹 라쏘' in header_value:
                column_color = self.GROUP_LASSO_FILL
            else:
                column_color = self.COMMON_FILL

            max_length = 0
            for cell in column:
                cell.border = self.THIN_BORDER
                if cell.row == 1:
                    cell.font = Font(bold=True)
                    cell.fill = self.HEADER_FILL
                    cell.alignment = Alignment(horizontal="center")
                else:
                    cell.fill = column_color
                    if header_value == 'exact_match' and cell.value == '아니오':
                        cell.fill = self.MISMATCH_FILL
                    if isinstance(cell.value, float):
                        cell.number_format = '0.000000'
                max_length = max(max_length, len(str(cell.value)) if cell.value is not None else 0)

            ws.column_dimensions[column_letter].width = min(max(max_length + 2, 10), 50)


def comparison_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """비교 실행 요약 표 (method, lambda, n_flagged, flagged, margin_ratio, status)"""
    columns = ['method', 'lambda', 'n_flagged', 'flagged', 'min_deviation', 'margin_ratio', 'status']
    return pd.DataFrame(rows, columns=columns)


def solutions_side_by_side(solutions: Sequence[Solution]) -> pd.DataFrame:
    """시스템별 편차를 방법/λ 별 열로 나란히 놓은 표"""
    if not solutions:
        return pd.DataFrame()
    frame = pd.DataFrame({'system': np.arange(1, solutions[0].n_systems + 1)})
    for solution in solutions:
        label = solution.method if solution.method != 'central' else 'group_lasso'
        frame[f'{label}_lambda_{solution.lam:g}'] = solution.deviations
    return frame
