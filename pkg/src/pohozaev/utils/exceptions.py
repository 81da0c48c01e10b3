from typing import Dict, Any, Optional, List


class ErrorCode:
    """错误码定义"""
    # 参数错误
    INVALID_PARAMETER = "INVALID_PARAMETER"
    DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
    INFEASIBLE_FAMILY = "INFEASIBLE_FAMILY"

    # 投影错误
    PROJECTION_INFEASIBLE = "PROJECTION_INFEASIBLE"
    INFEASIBLE_GUESS = "INFEASIBLE_GUESS"

    # 数值错误
    EVALUATION_ERROR = "EVALUATION_ERROR"
    NON_CONVERGENCE = "NON_CONVERGENCE"
    FLAT_LANDSCAPE = "FLAT_LANDSCAPE"

    # 复现错误
    REPRODUCTION_FAILURE = "REPRODUCTION_FAILURE"


class ExitCode:
    """命令行退出码"""
    SUCCESS = 0
    INFEASIBLE = 2
    NON_CONVERGENCE = 3
    REPRODUCTION_FAILURE = 4


class MMAPException(Exception):
    """MMAP 基础异常"""

    def __init__(
        self,
        error_code: str,
        message: str,
        exit_code: int = ExitCode.NON_CONVERGENCE,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.error_code = error_code
        self.message = message
        self.exit_code = exit_code
        self.details = details
        super().__init__(message)


class InvalidParameterError(MMAPException):
    """参数超出定义域"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            ErrorCode.INVALID_PARAMETER,
            message,
            ExitCode.INFEASIBLE,
            details,
        )


class DimensionMismatchError(MMAPException):
    """节点数与网格不一致"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            ErrorCode.DIMENSION_MISMATCH,
            message,
            ExitCode.INFEASIBLE,
            details,
        )


class InfeasibleFamilyError(MMAPException):
    """渐近线性族要求 λs < 1"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            ErrorCode.INFEASIBLE_FAMILY,
            message,
            ExitCode.INFEASIBLE,
            details,
        )


class ProjectionInfeasible(MMAPException):
    """∫G(w) ≤ 0，无法投影到 Pohozaev 流形"""

    def __init__(self, message: str, g_integral: float, details: Optional[Dict[str, Any]] = None):
        self.g_integral = g_integral
        details = dict(details or {})
        details.setdefault("g_integral", g_integral)
        super().__init__(
            ErrorCode.PROJECTION_INFEASIBLE,
            message,
            ExitCode.INFEASIBLE,
            details,
        )


class InfeasibleGuessError(MMAPException):
    """初始猜测不满足 ∫G(w0) > 0"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            ErrorCode.INFEASIBLE_GUESS,
            message,
            ExitCode.INFEASIBLE,
            details,
        )


class EvaluationError(MMAPException):
    """被积函数出现非有限值"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            ErrorCode.EVALUATION_ERROR,
            message,
            ExitCode.NON_CONVERGENCE,
            details,
        )


class NonConvergenceError(MMAPException):
    """SOR 迭代未收敛"""

    def __init__(self, message: str, last_residual: float, iterations: int):
        self.last_residual = last_residual
        self.iterations = iterations
        super().__init__(
            ErrorCode.NON_CONVERGENCE,
            message,
            ExitCode.NON_CONVERGENCE,
            {"last_residual": last_residual, "iterations": iterations},
        )


class FlatLandscapeError(MMAPException):
    """线搜索在 K 步内既无上升也无下降"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            ErrorCode.FLAT_LANDSCAPE,
            message,
            ExitCode.NON_CONVERGENCE,
            details,
        )


class ReproductionFailure(MMAPException):
    """复现结果超出容差"""

    def __init__(self, message: str, failing_cells: List[str]):
        self.failing_cells = failing_cells
        super().__init__(
            ErrorCode.REPRODUCTION_FAILURE,
            message,
            ExitCode.REPRODUCTION_FAILURE,
            {"failing_cells": failing_cells},
        )


def handle_exception(e: Exception) -> Dict[str, Any]:
    """异常处理函数，返回可序列化的诊断信息与退出码"""
    if isinstance(e, MMAPException):
        return {
            "exit_code": e.exit_code,
            "error_code": e.error_code,
            "message": e.message,
            "details": e.details,
        }
    # 处理其他异常
    return {
        "exit_code": ExitCode.NON_CONVERGENCE,
        "error_code": "SYSTEM_ERROR",
        "message": "Internal error",
        "details": str(e),
    }
