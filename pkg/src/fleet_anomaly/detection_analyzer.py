"""
탐지 성과 분석 모듈
"""
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from fleet_anomaly.baseline import threshold_report
from fleet_anomaly.core import FleetTruth, Solution


class DetectionAnalyzer:
    """탐지 결과 분석기"""

    def calculate_metrics(self, solution: Solution, truth: Optional[FleetTruth]) -> Dict[str, Any]:
        """판정 집합을 실제 이상 집합과 비교한 지표 계산"""
        flagged = set(solution.flagged)
        margin = threshold_report(solution, solution.support_tolerance)

        metrics = {
            'method': solution.method,
            'lambda': solution.lam,
            'n_flagged': len(flagged),
            'flagged': sorted(flagged),
            'margin_ratio': margin.margin_ratio,
        }
        if truth is None:
            return metrics

        actual = set(truth.anomaly_indices)
        true_positives = len(flagged & actual)
        false_positives = len(flagged - actual)
        false_negatives = len(actual - flagged)

        # 판정/실제 집합이 비어 있으면 정의상 1
        precision = true_positives / len(flagged) if flagged else 1.0
        recall = true_positives / len(actual) if actual else 1.0

        metrics.update({
            'true_anomalies': sorted(actual),
            'true_positives': true_positives,
            'false_positives': false_positives,
            'false_negatives': false_negatives,
            'precision': precision,
            'recall': recall,
            'exact_match': flagged == actual,
        })
        return metrics

    @staticmethod
    def sup_norm_agreement(first: Solution, second: Solution) -> float:
        """(θ̂, θ̂_i) 전체의 상대 최대 노름 차이"""
        stacked_first = np.vstack([first.nominal[np.newaxis, :], first.per_system])
        stacked_second = np.vstack([second.nominal[np.newaxis, :], second.per_system])
        scale = max(float(np.max(np.abs(stacked_first))), 1.0)
        return float(np.max(np.abs(stacked_first - stacked_second))) / scale

    def compare_solutions(self, solutions: Sequence[Solution],
                          truth: Optional[FleetTruth] = None) -> Dict[str, Any]:
        """여러 풀이 결과 비교 (첫 번째 결과 기준 일치도 포함)"""
        comparison = {}
        reference = solutions[0] if solutions else None
        for solution in solutions:
            key = f"{solution.method}(λ={solution.lam:g})" if solution.lam is not None else solution.method
            entry = self.calculate_metrics(solution, truth)
            entry['agreement_with_first'] = self.sup_norm_agreement(reference, solution)
            entry['same_flagged_as_first'] = solution.flagged == reference.flagged
            comparison[key] = entry
        return comparison

    def success_rate(self, exact_matches: Iterable[bool]) -> float:
        """반복 실험의 정확 일치 비율"""
        matches = list(exact_matches)
        if not matches:
            return 0.0
        return sum(bool(match) for match in matches) / len(matches)

    def generate_summary(self, solution: Solution, truth: Optional[FleetTruth] = None) -> str:
        """탐지 요약 생성"""
        metrics = self.calculate_metrics(solution, truth)
        flagged_text = ', '.join(str(tag) for tag in metrics['flagged']) or '없음'
        lam_text = f"{solution.lam:.6g}" if solution.lam is not None else 'N/A'
        margin = metrics['margin_ratio']
        margin_text = '무한대 (정확한 0)' if np.isinf(margin) else f"{margin:.3f}"

        summary = f"""
=== 함대 이상탐지 결과 ===

풀이 설정:
- 방법: {solution.method}
- λ: {lam_text}
- 노름: p={solution.p}
- 판정 임계값: {solution.support_tolerance:.3e}

판정 결과:
- 이상 시스템 수: {metrics['n_flagged']}
- 이상 시스템: {flagged_text}
- 목적함수: {solution.objective:.10g}
- 여유 비율: {margin_text}
"""
        if truth is not None:
            summary += f"""
실제 이상과 비교:
- 실제 이상 시스템: {', '.join(str(tag) for tag in metrics['true_anomalies']) or '없음'}
- 정밀도: {metrics['precision']*100:.1f}%
- 재현율: {metrics['recall']*100:.1f}%
- 정확 일치: {'예' if metrics['exact_match'] else '아니오'}
"""
        return summary
