"""径向网格、节点函数、求积与范数。

所有积分都在 [0, R*] 上用复合梯形公式计算，并带有 4π r² 的球坐标权重。
网格缩放只改变步长与区间长度，从不重新采样节点值，因此离散的缩放恒等式
（梯度项按 t、其余积分按 t³）精确成立。
"""
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from pohozaev.utils.exceptions import (
    DimensionMismatchError,
    EvaluationError,
    InvalidParameterError,
)

FOUR_PI = 4.0 * np.pi
MIN_PANELS = 4

ArrayLike = Union[Sequence[float], NDArray[np.float64]]
PointwiseMap = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class RadialGrid:
    """[0, R*] 上的均匀网格，M 个区间、M+1 个节点"""
    panels: int
    spacing: float

    def __post_init__(self):
        if int(self.panels) != self.panels or self.panels < MIN_PANELS:
            raise InvalidParameterError(
                f"A radial grid needs at least {MIN_PANELS} panels, got {self.panels}"
            )
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise InvalidParameterError(f"Grid spacing must be positive, got {self.spacing}")

    @classmethod
    def uniform(cls, extent: float, panels: int) -> 'RadialGrid':
        """按区间长度与区间数构造网格"""
        if not np.isfinite(extent) or extent <= 0:
            raise InvalidParameterError(f"Grid extent must be positive, got {extent}")
        if int(panels) != panels or panels < MIN_PANELS:
            raise InvalidParameterError(
                f"A radial grid needs at least {MIN_PANELS} panels, got {panels}"
            )
        return cls(panels=int(panels), spacing=extent / panels)

    @property
    def node_count(self) -> int:
        return self.panels + 1

    @property
    def extent(self) -> float:
        return self.panels * self.spacing

    @property
    def nodes(self) -> NDArray[np.float64]:
        return np.arange(self.node_count, dtype=np.float64) * self.spacing

    def scaled(self, t: float) -> 'RadialGrid':
        """r_i → t·r_i"""
        return RadialGrid(panels=self.panels, spacing=self.spacing * t)


@dataclass(frozen=True)
class RadialFunction:
    """径向 H¹ 函数在网格节点上的取值"""
    grid: RadialGrid
    values: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.grid.node_count:
            raise DimensionMismatchError(
                f"Expected {self.grid.node_count} nodal values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise EvaluationError("Radial function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_callable(cls, grid: RadialGrid, func: Callable[[NDArray[np.float64]], ArrayLike]) -> 'RadialFunction':
        return cls(grid, np.asarray(func(grid.nodes), dtype=np.float64))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> 'RadialFunction':
        return cls(grid, np.zeros(grid.node_count))

    def with_values(self, values: ArrayLike) -> 'RadialFunction':
        return RadialFunction(self.grid, values)

    def axpy(self, alpha: float, other: 'RadialFunction') -> 'RadialFunction':
        """self + alpha·other，两者节点值逐点相加"""
        if other.grid.panels != self.grid.panels:
            raise DimensionMismatchError(
                f"Cannot combine functions on {self.grid.panels} and {other.grid.panels} panels"
            )
        return RadialFunction(self.grid, self.values + alpha * other.values)

    @property
    def at_origin(self) -> float:
        return float(self.values[0])

    def interpolate(self, radii: ArrayLike) -> NDArray[np.float64]:
        """在任意半径处线性插值，区间外取 0"""
        return np.interp(np.asarray(radii, dtype=np.float64), self.grid.nodes, self.values, right=0.0)


def trapezoid(values: ArrayLike, grid: RadialGrid) -> float:
    """复合梯形公式 Δr·((h₀+h_M)/2 + Σ h_i)"""
    h = np.asarray(values, dtype=np.float64)
    if h.shape != (grid.node_count,):
        raise DimensionMismatchError(
            f"Integrand has shape {h.shape}, grid has {grid.node_count} nodes"
        )
    return float(grid.spacing * (0.5 * (h[0] + h[-1]) + h[1:-1].sum()))


def radial_integral(transform: PointwiseMap, w: RadialFunction) -> float:
    """∫_{ℝ³} g(w) dx 截断到 [0, R*]"""
    g = np.asarray(transform(w.values), dtype=np.float64)
    if g.shape != w.values.shape:
        g = np.broadcast_to(g, w.values.shape)
    if not np.all(np.isfinite(g)):
        raise EvaluationError("Pointwise transform produced non-finite values")
    nodes = w.grid.nodes
    return FOUR_PI * trapezoid(g * nodes * nodes, w.grid)


def nodal_derivative(w: RadialFunction) -> NDArray[np.float64]:
    """内部中心差分，两端二阶单侧差分"""
    return np.gradient(w.values, w.grid.spacing, edge_order=2)


def grad_l2_sq(w: RadialFunction) -> float:
    """4π ∫ |w'|² r² dr"""
    derivative = nodal_derivative(w)
    nodes = w.grid.nodes
    return FOUR_PI * trapezoid(derivative * derivative * nodes * nodes, w.grid)


def h1_norm_sq(w: RadialFunction) -> float:
    """‖w‖² = ∫|∇w|² + ∫w²"""
    return grad_l2_sq(w) + radial_integral(np.square, w)


def rescale(w: RadialFunction, t: float) -> RadialFunction:
    """u ↦ u(·/t)，通过拉伸网格实现"""
    if not np.isfinite(t) or t <= 0:
        raise InvalidParameterError(f"Rescaling parameter must be positive, got {t}")
    return RadialFunction(w.grid.scaled(t), w.values)
