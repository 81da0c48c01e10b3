from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


@dataclass
class CellComparison:
    """参考值与计算值的一次比较"""
    cell: str
    quantity: str
    reference: Optional[float]
    computed: Optional[float]
    relative_error: Optional[float]
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class StudyMetrics:
    """复现与参数研究的误差指标"""

    @staticmethod
    def relative_error(computed: float, reference: float) -> float:
        """|computed - reference| / |reference|"""
        if reference == 0:
            return abs(computed)
        return abs(computed - reference) / abs(reference)

    @staticmethod
    def compare(cell: str, quantity: str, computed: Optional[float], reference: Optional[float], tolerance: float) -> CellComparison:
        """参考值为 None 表示不可行格，此时计算值也必须缺失"""
        if reference is None or computed is None:
            return CellComparison(cell, quantity, reference, computed, None, tolerance, reference is None and computed is None)
        error = StudyMetrics.relative_error(computed, reference)
        return CellComparison(cell, quantity, reference, computed, error, tolerance, error <= tolerance)

    @staticmethod
    def compare_profile_value(
        cell: str,
        computed: float,
        reference: float,
        tolerance: float,
        tail_threshold: float,
        tail_tolerance: float,
    ) -> CellComparison:
        """尾部（参考值低于阈值）放宽容差；参考值为 0 时按绝对误差比较"""
        if reference >= tail_threshold:
            return StudyMetrics.compare(cell, "u", computed, reference, tolerance)
        if reference == 0:
            bound = tail_tolerance * tail_threshold
            return CellComparison(cell, "u", reference, computed, abs(computed), bound, abs(computed) <= bound)
        return StudyMetrics.compare(cell, "u", computed, reference, tail_tolerance)

    @staticmethod
    def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
        """log y 对 log x 的最小二乘斜率"""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        mask = (x > 0) & (y > 0)
        if mask.sum() < 2:
            return float('nan')
        slope, _ = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
        return float(slope)

    @staticmethod
    def plateau_ratio(a: float, b: float) -> float:
        """max(a, b) / min(a, b)，非正值时为 nan"""
        if a <= 0 or b <= 0:
            return float('nan')
        return max(a, b) / min(a, b)

    @staticmethod
    def successive_differences(values: Sequence[float]) -> List[float]:
        """相邻结果的相对差"""
        return [
            StudyMetrics.relative_error(a, b)
            for a, b in zip(values[:-1], values[1:])
        ]

    @staticmethod
    def aggregate(comparisons: List[CellComparison]) -> Dict[str, Any]:
        """汇总通过率与最大误差"""
        errors = [c.relative_error for c in comparisons if c.relative_error is not None]
        failed = [f"{c.cell}:{c.quantity}" for c in comparisons if not c.passed]
        return {
            'total': len(comparisons),
            'passed': len(comparisons) - len(failed),
            'max_relative_error': max(errors) if errors else 0.0,
            'failing_cells': failed,
        }
