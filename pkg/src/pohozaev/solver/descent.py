"""H¹ 最速下降方向：组装 (Δ - 1)v = -Δw + λw - f(w) 的离散系统并用 SOR 求解。"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from pohozaev.core.radial import RadialFunction, RadialGrid, h1_norm_sq
from pohozaev.models.nonlinearity import NonlinearityModel
from pohozaev.settings import SolverConfig
from pohozaev.solver.sor import relative_residual, residual_and_floor, sor_iterate
from pohozaev.utils.exceptions import InvalidParameterError, NonConvergenceError
from pohozaev.utils.logging import get_logger

logger = get_logger(__name__)

ZERO_NORM = 1e-14


@dataclass(frozen=True)
class TridiagonalSystem:
    """内部行 i = 1..M-1 的三对角系数，两端行不参与扫描"""
    grid: RadialGrid
    upper: NDArray[np.float64]
    diag: NDArray[np.float64]
    lower: NDArray[np.float64]
    rhs: NDArray[np.float64]

    def apply(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        """左端算子作用于 v，两端行置零"""
        v = np.asarray(values, dtype=np.float64)
        out = np.zeros_like(v)
        out[1:-1] = self.upper[1:-1] * v[2:] + self.diag[1:-1] * v[1:-1] + self.lower[1:-1] * v[:-2]
        return out

    def with_rhs(self, rhs: NDArray[np.float64]) -> 'TridiagonalSystem':
        return TridiagonalSystem(self.grid, self.upper, self.diag, self.lower, np.asarray(rhs, dtype=np.float64))

    def residual(self, values: NDArray[np.float64]) -> float:
        """相对残差 max|Av - b| / max(1, max|b|)"""
        return float(relative_residual(self.upper, self.diag, self.lower, self.rhs, np.asarray(values, dtype=np.float64)))

    def residual_floor(self, values: NDArray[np.float64]) -> float:
        """A·v 舍入误差对应的相对残差下限"""
        return float(residual_and_floor(self.upper, self.diag, self.lower, self.rhs, np.asarray(values, dtype=np.float64))[1])


@dataclass(frozen=True)
class SORReport:
    solution: RadialFunction
    iterations: int
    residual: float
    residual_floor: float = 0.0


@dataclass(frozen=True)
class DescentDirection:
    """单位 H¹ 范数的下降方向"""
    direction: RadialFunction
    raw: RadialFunction
    raw_norm: float
    sor_iterations: int
    final_residual: float
    residual_floor: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.raw_norm <= ZERO_NORM


def laplacian_stencil(grid: RadialGrid):
    """径向 Laplace 差分的系数 (α, γ)，α 对应 i+1，γ 对应 i-1"""
    r = grid.nodes
    dr = grid.spacing
    inv_dr2 = 1.0 / (dr * dr)
    alpha = np.zeros(grid.node_count)
    gamma = np.zeros(grid.node_count)
    alpha[1:-1] = inv_dr2 + 1.0 / (r[1:-1] * dr)
    gamma[1:-1] = inv_dr2 - 1.0 / (r[1:-1] * dr)
    return alpha, gamma


def radial_residual(model: NonlinearityModel, w: RadialFunction) -> NDArray[np.float64]:
    """内部节点上的 -Δw + λw - f(w)，两端为 0"""
    alpha, gamma = laplacian_stencil(w.grid)
    inv_dr2 = 1.0 / (w.grid.spacing ** 2)
    u = w.values
    out = np.zeros_like(u)
    out[1:-1] = (
        -alpha[1:-1] * u[2:]
        + (2.0 * inv_dr2 + model.lam) * u[1:-1]
        - gamma[1:-1] * u[:-2]
        - np.asarray(model.f(u[1:-1]))
    )
    return out


def assemble_system(model: NonlinearityModel, w1: RadialFunction) -> TridiagonalSystem:
    """组装 (Δ - 1)v = -Δw₁ + λw₁ - f(w₁)"""
    grid = w1.grid
    alpha, gamma = laplacian_stencil(grid)
    diag = np.zeros(grid.node_count)
    diag[1:-1] = -(2.0 / grid.spacing ** 2 + 1.0)
    return TridiagonalSystem(
        grid=grid,
        upper=alpha,
        diag=diag,
        lower=gamma,
        rhs=radial_residual(model, w1),
    )


def run_sor(
    system: TridiagonalSystem,
    omega: float,
    tolerance: float,
    max_iterations: int,
    initial: Optional[NDArray[np.float64]] = None,
) -> SORReport:
    """SOR 求解并返回迭代次数与残差

    残差停在舍入下限而未达到 tolerance 时照常返回，report.residual 仍是真实残差。
    """
    if not 0.0 < omega < 2.0:
        raise InvalidParameterError(f"SOR relaxation must lie in (0, 2), got {omega}")
    n = system.grid.node_count
    if initial is None or np.shape(initial) != (n,):
        v = np.zeros(n)
    else:
        v = np.array(initial, dtype=np.float64)
    iterations, residual, floor = sor_iterate(
        system.upper, system.diag, system.lower, system.rhs,
        v, float(omega), float(tolerance), int(max_iterations),
    )
    if residual > max(tolerance, floor):
        raise NonConvergenceError(
            f"SOR did not reach tolerance {tolerance:.1e} in {iterations} sweeps",
            last_residual=float(residual),
            iterations=int(iterations),
        )
    if residual > tolerance:
        logger.debug(f"SOR stopped at the rounding floor: residual {residual:.3e}, floor {floor:.3e}")
    return SORReport(RadialFunction(system.grid, v), int(iterations), float(residual), float(floor))


def sor_solve(
    system: TridiagonalSystem,
    omega: float,
    tolerance: float,
    max_iterations: int,
    initial: Optional[NDArray[np.float64]] = None,
) -> RadialFunction:
    return run_sor(system, omega, tolerance, max_iterations, initial).solution


def steepest_direction(
    model: NonlinearityModel,
    w1: RadialFunction,
    config: SolverConfig,
    warm: Optional[RadialFunction] = None,
) -> DescentDirection:
    """求解 v 并归一化；‖v‖ = 0 表示已是离散解"""
    system = assemble_system(model, w1)
    if not np.any(system.rhs):
        zero = RadialFunction.zeros(w1.grid)
        return DescentDirection(zero, zero, 0.0, 0, 0.0)

    initial = warm.values if (warm is not None and config.warm_start) else None
    report = run_sor(system, config.sor_omega, config.sor_tol, config.sor_max_iterations, initial)
    raw_norm = float(np.sqrt(h1_norm_sq(report.solution)))
    logger.debug(f"SOR: {report.iterations} sweeps, residual {report.residual:.3e}, ‖v‖ = {raw_norm:.6e}")

    if raw_norm <= ZERO_NORM:
        direction = RadialFunction.zeros(w1.grid)
    else:
        direction = report.solution.with_values(report.solution.values / raw_norm)
    return DescentDirection(
        direction=direction,
        raw=report.solution,
        raw_norm=raw_norm,
        sor_iterations=report.iterations,
        final_residual=report.residual,
        residual_floor=report.residual_floor,
    )


def ode_residual(model: NonlinearityModel, u: RadialFunction) -> float:
    """径向方程 -u'' - (2/r)u' + λu - f(u) 在内部节点上的最大残差"""
    return float(np.max(np.abs(radial_residual(model, u)[1:-1])))


def ode_residual_ratio(model: NonlinearityModel, u: RadialFunction) -> float:
    """ode_residual / max|f(u)|"""
    scale = float(np.max(np.abs(model.f(u.values))))
    return ode_residual(model, u) / scale if scale > 0 else float('inf')
