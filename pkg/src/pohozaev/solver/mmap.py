"""Pohozaev 流形上的最小化作用量算法（MMAP）。

外层循环：投影到流形 → 求最速下降方向 → 沿方向做分级线搜索 → 回到投影。
线搜索失败时按 ∫G > 0 的最远点重启；收敛后若解变号，则从正部重新开始。
"""
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from pohozaev.core.radial import RadialFunction, RadialGrid, rescale
from pohozaev.models.nonlinearity import NonlinearityModel, PowerModel
from pohozaev.settings import SolverConfig, settings
from pohozaev.solver.descent import DescentDirection, steepest_direction
from pohozaev.solver.energy import action_I, g_integral, project
from pohozaev.utils.exceptions import (
    FlatLandscapeError,
    InfeasibleGuessError,
    InvalidParameterError,
    ProjectionInfeasible,
)
from pohozaev.utils.logging import get_logger

logger = get_logger(__name__)

GUESS_KINDS = ("gaussian", "sech")
MAX_POSITIVITY_RESTARTS = 3
TAIL_FACTOR = 5.0

LINE_MINIMUM = "line_minimum"
NEED_RESTART = "need_restart"

STATUS_CONVERGED = "converged"
STATUS_STALLED = "stalled"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_RESTARTED_EXHAUSTED = "restarted_exhausted"


class _RestartSignal(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class TraceRecord:
    """一次外层迭代的记录"""
    iteration: int
    action: float
    t_star: float
    alpha: float
    grad_norm: float
    restart: bool = False


@dataclass
class LineSearchOutcome:
    kind: str
    offset: float
    value: float
    point: Optional[RadialFunction] = None
    t_star: float = 1.0
    restart_point: Optional[RadialFunction] = None
    k0: int = 0
    reason: str = ""
    evaluations: int = 0

    @property
    def needs_restart(self) -> bool:
        return self.kind == NEED_RESTART


@dataclass
class SolveResult:
    """求解结果"""
    solution: RadialFunction
    action: float
    grad_norm: float
    outer_iterations: int
    restarts: int
    status: str
    stop_reason: str
    trace: List[TraceRecord] = field(default_factory=list)
    positivity_restarts: int = 0
    elapsed: float = 0.0

    @property
    def u_at_zero(self) -> float:
        return self.solution.at_origin

    @property
    def R_star_final(self) -> float:
        return self.solution.grid.extent

    def summary(self) -> dict:
        return {
            "u0": self.u_at_zero,
            "action": self.action,
            "v_norm": self.grad_norm,
            "iterations": self.outer_iterations,
            "restarts": self.restarts,
            "status": self.status,
            "R_star_final": self.R_star_final,
        }


def initial_guess(
    kind: str = "gaussian",
    amplitude: Optional[float] = None,
    width: Optional[float] = None,
    grid: Optional[RadialGrid] = None,
) -> RadialFunction:
    """A·exp(-σr²)（或 A·sech(σr)），末端节点置 0 与 v_M = 0 一致"""
    amplitude = settings.guess_amplitude if amplitude is None else amplitude
    width = settings.guess_width if width is None else width
    if amplitude <= 0 or width <= 0:
        raise InvalidParameterError(
            f"Guess amplitude and width must be positive, got {amplitude}, {width}"
        )
    grid = grid or RadialGrid.uniform(settings.r_star, settings.panels)
    r = grid.nodes
    if kind == "gaussian":
        values = amplitude * np.exp(-width * r * r)
    elif kind == "sech":
        values = amplitude / np.cosh(width * r)
    else:
        raise InvalidParameterError(f"Unknown guess kind: {kind}")
    values[-1] = 0.0
    return RadialFunction(grid, values)


def perturb_guess(guess: RadialFunction, relative: float, seed: int = 0) -> RadialFunction:
    """逐点乘以 1 + relative·U(-1, 1)，固定种子可复现"""
    if relative < 0:
        raise InvalidParameterError(f"Perturbation must be nonnegative, got {relative}")
    rng = np.random.default_rng(seed)
    values = guess.values * (1.0 + relative * rng.uniform(-1.0, 1.0, guess.values.shape))
    values[-1] = 0.0
    return guess.with_values(values)


class _ProjectedLine:
    """φ(s) = I(project(w₁ + s·v̂))，每 N_r 次求值重新计算一次 t"""

    def __init__(self, model: NonlinearityModel, w1: RadialFunction, direction: RadialFunction, config: SolverConfig):
        self.model = model
        self.w1 = w1
        self.direction = direction
        self.config = config
        self._cached_t: Optional[float] = None
        self.evaluations = 0

    def point(self, offset: float) -> RadialFunction:
        return self.w1.axpy(offset, self.direction)

    def __call__(self, offset: float) -> float:
        x = self.point(offset)
        refresh = self._cached_t is None or self.evaluations % self.config.reproject_stride == 0
        self.evaluations += 1
        if not refresh:
            return action_I(self.model, rescale(x, self._cached_t))
        try:
            result = project(self.model, x)
        except ProjectionInfeasible:
            raise _RestartSignal("projection infeasible")
        if result.t_star < self.config.t_min:
            raise _RestartSignal(f"t* = {result.t_star:.3e} below t_min")
        self._cached_t = result.t_star
        return result.action_at_t


def _bracket_search(
    evaluate: Callable[[float], float],
    base_value: float,
    alpha0: float,
    alpha_min: float,
    cap: int,
):
    """分级线搜索，返回目前最低点 (偏移量, 函数值)

    步长 α 下从起点前进，直到 φ(k̄) > φ(k̄-1)；最低点为 k̄-1，
    步长缩小十倍后从 k̄-2 重新扫描区间 [k̄-2, k̄]。
    K 步内只降不升时抛出 _RestartSignal。
    """
    start, start_value = 0.0, base_value
    best, best_value = 0.0, base_value
    alpha = alpha0
    while alpha >= alpha_min:
        values = [start_value]
        decreased = False
        bracketed = False
        k = 1
        while k <= cap:
            current = evaluate(start + k * alpha)
            values.append(current)
            if current < best_value:
                best, best_value = start + k * alpha, current
            previous = values[k - 1]
            if current > previous:
                # 上升：检查 k̄ 是否为局部极大
                if k < cap:
                    following = evaluate(start + (k + 1) * alpha)
                    values.append(following)
                    if following < best_value:
                        best, best_value = start + (k + 1) * alpha, following
                    if following < current and following < previous:
                        decreased = True
                        k += 2
                        continue
                left = max(k - 2, 0)
                start, start_value = start + left * alpha, values[left]
                bracketed = True
                break
            if current < previous:
                decreased = True
            k += 1
        if not bracketed:
            if decreased:
                raise _RestartSignal(f"no rise within {cap} steps of {alpha:.1e}")
            raise FlatLandscapeError(
                f"Line search found neither rise nor decrease in {cap} steps",
                details={"alpha": alpha, "offset": start},
            )
        alpha /= 10.0
    return best, best_value


def _largest_feasible_k(model: NonlinearityModel, base: RadialFunction, direction: RadialFunction, alpha: float, cap: int) -> int:
    """满足 ∫G(base + kαv̂) > 0 的最大 k ≤ K"""
    for k in range(cap, 0, -1):
        if g_integral(model, base.axpy(k * alpha, direction)) > 0:
            return k
    return 0


def line_minimize(
    model: NonlinearityModel,
    w1: RadialFunction,
    direction: RadialFunction,
    config: SolverConfig,
    objective: Optional[Callable[[float], float]] = None,
) -> LineSearchOutcome:
    """沿 v̂ 做分级线搜索

    objective 给出时替代 φ(s)，只返回偏移量（用于测试）。
    """
    if objective is not None:
        base_value = objective(0.0)
        try:
            offset, value = _bracket_search(
                objective, base_value, config.alpha0, config.alpha_min, config.line_search_cap
            )
        except _RestartSignal as signal:
            return LineSearchOutcome(kind=NEED_RESTART, offset=0.0, value=base_value, reason=signal.reason)
        return LineSearchOutcome(kind=LINE_MINIMUM, offset=offset, value=value)

    line = _ProjectedLine(model, w1, direction, config)
    base_value = action_I(model, w1)
    try:
        offset, value = _bracket_search(
            line, base_value, config.alpha0, config.alpha_min, config.line_search_cap
        )
    except _RestartSignal as signal:
        k0 = _largest_feasible_k(model, w1, direction, config.alpha0, config.line_search_cap)
        logger.info(
            f"Line search needs restart ({signal.reason}); restarting from k0 = {k0} "
            f"instead of the last decreasing iterate"
        )
        return LineSearchOutcome(
            kind=NEED_RESTART,
            offset=0.0,
            value=base_value,
            restart_point=w1.axpy(k0 * config.alpha0, direction),
            k0=k0,
            reason=signal.reason,
            evaluations=line.evaluations,
        )

    if offset == 0.0:
        return LineSearchOutcome(LINE_MINIMUM, 0.0, base_value, w1, 1.0, evaluations=line.evaluations)
    accepted = project(model, line.point(offset))
    if accepted.action_at_t > base_value:
        # 过期的 t 低估了 φ，退回起点
        logger.debug(f"Reprojected value {accepted.action_at_t:.10e} exceeds base, step rejected")
        return LineSearchOutcome(LINE_MINIMUM, 0.0, base_value, w1, 1.0, evaluations=line.evaluations)
    return LineSearchOutcome(
        kind=LINE_MINIMUM,
        offset=offset,
        value=accepted.action_at_t,
        point=accepted.projected,
        t_star=accepted.t_star,
        evaluations=line.evaluations,
    )


@dataclass
class _DescentState:
    trace: List[TraceRecord]
    iterations: int = 0
    restarts: int = 0


def _descend(model: NonlinearityModel, config: SolverConfig, w0: RadialFunction, state: _DescentState):
    """从 w0 出发下降直到停止，返回 (解, 方向, 状态, 停止原因)"""
    projection = project(model, w0)
    w1 = projection.projected
    t_star, alpha_used, restarted = projection.t_star, 0.0, True
    warm: Optional[RadialFunction] = None
    stalls = 0

    while True:
        direction: DescentDirection = steepest_direction(model, w1, config, warm)
        if config.warm_start:
            warm = direction.raw
        action = action_I(model, w1)
        state.trace.append(TraceRecord(state.iterations, action, t_star, alpha_used, direction.raw_norm, restarted))
        logger.debug(
            f"iter {state.iterations}: I = {action:.10f}, t* = {t_star:.6f}, "
            f"alpha = {alpha_used:.3e}, ‖v‖ = {direction.raw_norm:.6e}"
        )

        if direction.raw_norm < config.eps_stop:
            return w1, direction, STATUS_CONVERGED, "eps"
        if stalls >= config.stall_patience:
            return w1, direction, STATUS_STALLED, "zero_step"
        if state.iterations >= config.max_outer_iterations:
            return w1, direction, STATUS_MAX_ITERATIONS, "max_iterations"

        outcome = line_minimize(model, w1, direction.direction, config)
        state.iterations += 1

        if outcome.needs_restart:
            state.restarts += 1
            if state.restarts > config.max_restarts:
                logger.warning(f"Restart budget of {config.max_restarts} exhausted")
                return w1, direction, STATUS_RESTARTED_EXHAUSTED, "restarts"
            projection = project(model, outcome.restart_point)
            w1 = projection.projected
            t_star, alpha_used, restarted = projection.t_star, outcome.k0 * config.alpha0, True
            warm, stalls = None, 0
            continue

        stalls = stalls + 1 if outcome.offset == 0.0 else 0
        w1 = outcome.point
        t_star, alpha_used, restarted = outcome.t_star, outcome.offset, False


def _positive_part_guess(model: NonlinearityModel, w: RadialFunction, fallback: RadialFunction) -> RadialFunction:
    """正部 max(w, 0)；若不可投影或作用量不更低，退回调用方的初值"""
    candidate = w.with_values(np.maximum(w.values, 0.0))
    try:
        if g_integral(model, candidate) > 0 and project(model, candidate).action_at_t < action_I(model, w):
            return candidate
    except ProjectionInfeasible:
        pass
    return fallback


def solve(
    model: NonlinearityModel,
    config: Optional[SolverConfig] = None,
    guess: Optional[RadialFunction] = None,
) -> SolveResult:
    """MMAP 主循环"""
    config = config or settings.get_solver_config()
    if guess is None:
        guess = initial_guess(grid=RadialGrid.uniform(config.r_star, config.panels))
    if not np.any(guess.values):
        raise InvalidParameterError("Initial guess must be nonzero")

    # 初值必须可投影
    g0 = g_integral(model, guess)
    if not g0 > 0:
        raise InfeasibleGuessError(
            f"Initial guess violates ∫G(w0) > 0 (∫G = {g0:.6e})",
            details={"g_integral": g0},
        )

    logger.info(f"Solving {model!r} on {config.panels} panels, R* = {config.r_star}")
    start = time.time()
    state = _DescentState(trace=[])
    positivity_restarts = 0
    w0 = guess

    while True:
        solution, direction, status, stop_reason = _descend(model, config, w0, state)
        if status != STATUS_CONVERGED or solution.values.min() >= -config.positivity_tol:
            break
        positivity_restarts += 1
        if positivity_restarts > MAX_POSITIVITY_RESTARTS:
            status, stop_reason = STATUS_RESTARTED_EXHAUSTED, "sign_change"
            break
        logger.warning(
            f"Converged profile changes sign (min {solution.values.min():.3e}); "
            f"positivity restart {positivity_restarts}/{MAX_POSITIVITY_RESTARTS}"
        )
        w0 = _positive_part_guess(model, solution, guess)

    result = SolveResult(
        solution=solution,
        action=action_I(model, solution),
        grad_norm=direction.raw_norm,
        outer_iterations=state.iterations,
        restarts=state.restarts,
        status=status,
        stop_reason=stop_reason,
        trace=state.trace,
        positivity_restarts=positivity_restarts,
        elapsed=time.time() - start,
    )

    tail = TAIL_FACTOR / np.sqrt(model.lam)
    if result.R_star_final < tail:
        logger.warning(f"Final R* = {result.R_star_final:.3f} < {tail:.3f}; tail is likely truncated")
    logger.info(
        f"Finished: status={status} ({stop_reason}), u(0) = {result.u_at_zero:.5f}, "
        f"I = {result.action:.5f}, ‖v‖ = {result.grad_norm:.3e}, "
        f"{result.outer_iterations} iterations, {result.restarts} restarts, {result.elapsed:.1f}s"
    )
    return result


def scaling_check(
    u1_result: SolveResult,
    lam: float,
    config: Optional[SolverConfig] = None,
    p: float = 3.0,
    lam_result: Optional[SolveResult] = None,
) -> float:
    """u_λ(0) 与 λ^{1/(p-1)}·u₁(0) 的相对误差"""
    if lam == 1.0 and lam_result is None:
        return 0.0
    if lam_result is None:
        lam_result = solve(PowerModel(lam, p=p), config)
    expected = lam ** (1.0 / (p - 1.0)) * u1_result.u_at_zero
    return abs(lam_result.u_at_zero - expected) / abs(expected)


def profile_scaling_error(
    u1_result: SolveResult,
    lam_result: SolveResult,
    lam: float,
    radii,
    p: float = 3.0,
) -> float:
    """u_λ(r) 与 λ^{1/(p-1)}·u₁(√λ r) 在给定半径处的最大相对误差"""
    radii = np.asarray(radii, dtype=np.float64)
    expected = lam ** (1.0 / (p - 1.0)) * u1_result.solution.interpolate(np.sqrt(lam) * radii)
    actual = lam_result.solution.interpolate(radii)
    return float(np.max(np.abs(actual - expected) / np.abs(expected)))
