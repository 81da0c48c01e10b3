"""作用量 I、Pohozaev 泛函 J、到 Pohozaev 流形的投影以及纤维映射。

三维径向情形下伸缩 u ↦ u(·/t) 使梯度项按 t、其余积分按 t³ 缩放，
因此 h(t) = (t/2)∫|∇u|² - t³∫G(u)，唯一极大值点 t*² = ∫|∇u|² / (6∫G)。
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from pohozaev.core.radial import RadialFunction, grad_l2_sq, radial_integral, rescale
from pohozaev.models.nonlinearity import NonlinearityModel
from pohozaev.utils.exceptions import InvalidParameterError, ProjectionInfeasible

DIMENSION = 3
POHOZAEV_FACTOR = 2.0 * DIMENSION / (DIMENSION - 2)

AUDIT_FACTORS = (0.5, 0.9, 1.1, 2.0)


@dataclass(frozen=True)
class ProjectionResult:
    """投影结果"""
    t_star: float
    projected: RadialFunction
    action_at_t: float
    g_integral: float


def g_integral(model: NonlinearityModel, w: RadialFunction) -> float:
    """∫G(w)"""
    return radial_integral(model.G, w)


def action_I(model: NonlinearityModel, w: RadialFunction) -> float:
    """I(w) = ½(∫|∇w|² + λ∫w²) - ∫F(w)"""
    quadratic = grad_l2_sq(w) + model.lam * radial_integral(np.square, w)
    return 0.5 * quadratic - radial_integral(model.F, w)


def pohozaev_J(model: NonlinearityModel, w: RadialFunction) -> float:
    """J(w) = ∫|∇w|² - 6∫G(w)"""
    return grad_l2_sq(w) - POHOZAEV_FACTOR * g_integral(model, w)


def project_t(model: NonlinearityModel, w: RadialFunction) -> float:
    """使 J(w(·/t)) = 0 的正根 t*"""
    denominator = g_integral(model, w)
    if not denominator > 0:
        raise ProjectionInfeasible(
            f"Cannot project onto the Pohozaev manifold: ∫G = {denominator:.6e} ≤ 0",
            g_integral=denominator,
        )
    return float(np.sqrt(grad_l2_sq(w) / (POHOZAEV_FACTOR * denominator)))


def project(model: NonlinearityModel, w: RadialFunction) -> ProjectionResult:
    """投影到 Pohozaev 流形：网格按 t* 拉伸"""
    denominator = g_integral(model, w)
    if not denominator > 0:
        raise ProjectionInfeasible(
            f"Cannot project onto the Pohozaev manifold: ∫G = {denominator:.6e} ≤ 0",
            g_integral=denominator,
        )
    t_star = float(np.sqrt(grad_l2_sq(w) / (POHOZAEV_FACTOR * denominator)))
    projected = rescale(w, t_star)
    return ProjectionResult(
        t_star=t_star,
        projected=projected,
        action_at_t=action_I(model, projected),
        g_integral=denominator,
    )


def _check_t(t: float) -> None:
    if not np.isfinite(t) or t <= 0:
        raise InvalidParameterError(f"Fiber parameter must be positive, got {t}")


def h_eval(model: NonlinearityModel, w: RadialFunction, t: float) -> float:
    """h(t) = I(w(·/t))"""
    _check_t(t)
    return 0.5 * t * grad_l2_sq(w) - t ** 3 * g_integral(model, w)


def h_prime(model: NonlinearityModel, w: RadialFunction, t: float) -> float:
    """h'(t) = ½∫|∇w|² - 3t²∫G(w)"""
    _check_t(t)
    return 0.5 * grad_l2_sq(w) - 3.0 * t * t * g_integral(model, w)


def audit_maximality(model: NonlinearityModel, w: RadialFunction, result: ProjectionResult) -> bool:
    """在 {0.5, 0.9, 1.1, 2}·t* 上检查 h(t*) 为最大"""
    return all(
        result.action_at_t >= h_eval(model, w, factor * result.t_star)
        for factor in AUDIT_FACTORS
    )


@dataclass
class FiberScan:
    """振幅射线 t ↦ I(t·w) 的采样"""
    t: NDArray[np.float64]
    values: NDArray[np.float64]

    def interior_maxima(self) -> List[Tuple[float, float]]:
        """严格内部局部极大值 (t, I)"""
        v = self.values
        idx = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1
        return [(float(self.t[i]), float(v[i])) for i in idx]

    @property
    def maxima_count(self) -> int:
        return len(self.interior_maxima())

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.t.tolist(), self.values.tolist()))


def fiber_scan(model: NonlinearityModel, w: RadialFunction, t_grid: Sequence[float]) -> FiberScan:
    """沿振幅射线 t·w 计算 I"""
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or np.any(t <= 0):
        raise InvalidParameterError("Amplitude grid must be a positive 1-D sequence")
    values = np.array([action_I(model, w.with_values(ti * w.values)) for ti in t])
    return FiberScan(t=t, values=values)
