"""
시스템별 편차 막대 차트 생성 모듈
"""
import os
from typing import Dict, List, Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.font_manager as fm
import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

from fleet_anomaly.core import Solution

# 스타일 설정
plt.style.use('seaborn-v0_8-whitegrid')
sns.set_palette("husl")

SVG_HASH_SALT = 'fleet-anomaly'
KOREAN_FONT_PATH = '/usr/share/fonts/opentype/noto/NotoSansCJK-Regular.ttc'


class ChartGenerator:
    """편차 막대 차트 생성기 (SVG 는 같은 입력에 같은 바이트)"""

    def __init__(self, chart_dir: str, image_format: str = 'svg'):
        self.chart_dir = chart_dir
        self.image_format = image_format
        self._setup_fonts()

        # 차트 디렉토리가 없으면 생성
        if self.chart_dir and not os.path.exists(self.chart_dir):
            os.makedirs(self.chart_dir)

    def _setup_fonts(self):
        """한글 폰트와 결정적 SVG 출력 설정"""
        korean_fonts = [f.name for f in fm.fontManager.ttflist if 'CJK' in f.name or 'Nanum' in f.name]
        if korean_fonts:
            plt.rcParams['font.family'] = korean_fonts[0]
        elif os.path.exists(KOREAN_FONT_PATH):
            plt.rcParams['font.family'] = fm.FontProperties(fname=KOREAN_FONT_PATH).get_name()
        plt.rcParams['axes.unicode_minus'] = False

        plt.rcParams['svg.hashsalt'] = SVG_HASH_SALT
        plt.rcParams['svg.fonttype'] = 'path'
        plt.rcParams['savefig.dpi'] = 150

    def _save(self, fig, basename: str) -> str:
        filepath = os.path.join(self.chart_dir, f'{basename}.{self.image_format}')
        metadata = {'Date': None} if self.image_format in ('svg', 'pdf') else None
        fig.savefig(filepath, format=self.image_format, metadata=metadata, bbox_inches='tight')
        plt.close(fig)
        return filepath

    @staticmethod
    def _title(solution: Solution) -> str:
        names = {'central': '합-노름 (중앙집중)', 'admm': '합-노름 (분산 ADMM)',
                 'tikhonov': '티호노프', 'oracle': '전수 탐색'}
        name = names.get(solution.method, solution.method)
        return f'{name}, λ={solution.lam:g}' if solution.lam is not None else name

    def create_deviation_chart(self, solution: Solution, basename: str,
                               threshold: Optional[float] = None) -> str:
        """시스템 번호별 ‖θ̂ − θ̂_i‖ 막대 차트 (임계값 선 선택)"""
        fig, ax = plt.subplots(figsize=(12, 4))
        systems = np.arange(1, solution.n_systems + 1)
        colors = ['#d62728' if tag in solution.flagged else '#1f77b4' for tag in systems]
        ax.bar(systems, solution.deviations, color=colors, width=0.8)

        if threshold is not None:
            ax.axhline(y=threshold, color='red', linestyle='-', linewidth=1.2, label=f'임계값 {threshold:g}')
            ax.legend(fontsize=9, loc='upper right')

        ax.set_title(self._title(solution), fontsize=13, fontweight='bold')
        ax.set_xlabel('시스템 번호', fontsize=11)
        ax.set_ylabel(f'‖θ̂ − θ̂_i‖_{solution.p}', fontsize=11)
        ax.set_xlim(0, solution.n_systems + 1)
        ax.grid(True, alpha=0.3)
        return self._save(fig, basename)

    def create_comparison_chart(self, solutions: Sequence[Solution], basename: str,
                                thresholds: Optional[Sequence[Optional[float]]] = None) -> str:
        """여러 결과의 편차 막대 차트를 세로로 쌓은 비교 차트"""
        thresholds = list(thresholds) if thresholds is not None else [None] * len(solutions)
        fig, axes = plt.subplots(len(solutions), 1, figsize=(12, 3 * len(solutions)), squeeze=False)
        for ax, solution, threshold in zip(axes[:, 0], solutions, thresholds):
            systems = np.arange(1, solution.n_systems + 1)
            ax.bar(systems, solution.deviations, color='#1f77b4', width=0.8)
            if threshold is not None:
                ax.axhline(y=threshold, color='red', linewidth=1.0)
            ax.set_title(self._title(solution), fontsize=11)
            ax.set_xlim(0, solution.n_systems + 1)
            ax.grid(True, alpha=0.3)
        axes[-1, 0].set_xlabel('시스템 번호', fontsize=11)
        fig.tight_layout()
        return self._save(fig, basename)

    def generate_all_charts(self, solutions: Sequence[Solution],
                            thresholds: Optional[Sequence[Optional[float]]] = None) -> Dict[str, str]:
        """결과별 차트와 비교 차트 일괄 생성"""
        thresholds = list(thresholds) if thresholds is not None else [None] * len(solutions)
        charts = {}
        for solution, threshold in zip(solutions, thresholds):
            key = f'deviations_{solution.method}_lambda_{solution.lam:g}'
            charts[key] = self.create_deviation_chart(solution, key, threshold)
        if len(solutions) > 1:
            charts['comparison'] = self.create_comparison_chart(solutions, 'comparison', thresholds)
        return charts
