import numpy as np
import pytest
from scipy.linalg import solve_banded

from pohozaev.core.radial import RadialFunction, RadialGrid, h1_norm_sq
from pohozaev.models.nonlinearity import PowerModel
from pohozaev.settings import SolverConfig
from pohozaev.solver.descent import (
    assemble_system,
    laplacian_stencil,
    ode_residual,
    radial_residual,
    run_sor,
    steepest_direction,
)
from pohozaev.solver.energy import action_I
from pohozaev.utils.exceptions import InvalidParameterError, NonConvergenceError


def manufactured_system(panels: int, extent: float = 5.0):
    """v = e^{-r²} - e^{-R²}，右端为 (Δ - 1)v 的解析值"""
    grid = RadialGrid.uniform(extent, panels)
    r = grid.nodes
    exact = np.exp(-r * r) - np.exp(-extent * extent)
    system = assemble_system(PowerModel(1.0), RadialFunction.zeros(grid))
    rhs = np.zeros_like(r)
    rhs[1:-1] = (4.0 * r[1:-1] ** 2 - 6.0) * np.exp(-r[1:-1] ** 2) - exact[1:-1]
    return system.with_rhs(rhs), exact


def test_stencil_coefficients():
    grid = RadialGrid.uniform(2.0, 40)
    alpha, gamma = laplacian_stencil(grid)
    dr = grid.spacing
    assert np.allclose(alpha[1:-1] + gamma[1:-1], 2.0 / dr ** 2)
    assert gamma[1] == pytest.approx(0.0, abs=1e-9)
    assert alpha[0] == alpha[-1] == 0.0


def test_zero_residual_gives_zero_direction():
    grid = RadialGrid.uniform(1.0, 20)
    config = SolverConfig.build(panels=20)
    result = steepest_direction(PowerModel(1.0), RadialFunction.zeros(grid), config)
    assert result.raw_norm == 0.0
    assert result.is_zero
    assert not np.any(result.direction.values)


def test_sor_reproduces_nodal_solution():
    grid = RadialGrid.uniform(5.0, 500)
    r = grid.nodes
    exact = np.exp(-r * r) - np.exp(-25.0)
    system = assemble_system(PowerModel(1.0), RadialFunction.zeros(grid))
    system = system.with_rhs(system.apply(exact))
    report = run_sor(system, 1.9, 1e-10, 1_000_000)
    solution = report.solution.values
    assert np.max(np.abs(solution[1:-1] - exact[1:-1])) < 1e-6
    assert solution[-1] == 0.0
    assert solution[0] == pytest.approx((4.0 * solution[1] - solution[2]) / 3.0)
    assert report.residual <= 1e-10


def test_discretization_is_second_order():
    errors = []
    spacings = []
    for panels in (250, 500, 1000):
        system, exact = manufactured_system(panels)
        solution = run_sor(system, 1.9, 1e-10, 1_000_000).solution.values
        errors.append(np.max(np.abs(solution[1:-1] - exact[1:-1])))
        spacings.append(system.grid.spacing)
    slope = np.polyfit(np.log(spacings), np.log(errors), 1)[0]
    assert 1.7 <= slope <= 2.3


def test_residual_contract():
    system, _ = manufactured_system(100)
    report = run_sor(system, 1.5, 1e-9, 1_000_000)
    assert report.residual == pytest.approx(system.residual(report.solution.values))
    assert report.residual <= 1e-9
    assert report.iterations > 0


def test_sor_reports_non_convergence():
    system, _ = manufactured_system(100)
    with pytest.raises(NonConvergenceError) as excinfo:
        run_sor(system, 1.9, 1e-12, 1)
    assert excinfo.value.iterations == 1
    assert excinfo.value.last_residual > 1e-12


@pytest.mark.parametrize("omega", [0.0, 2.0, -1.0])
def test_sor_rejects_bad_relaxation(omega):
    system, _ = manufactured_system(20)
    with pytest.raises(InvalidParameterError):
        run_sor(system, omega, 1e-8, 100)


def test_direction_is_normalized(gaussian3):
    config = SolverConfig.build(panels=2000, r_star=10.0, sor_tol=1e-9)
    result = steepest_direction(PowerModel(1.0), gaussian3, config)
    assert result.raw_norm > 0
    assert h1_norm_sq(result.direction) == pytest.approx(1.0, rel=1e-12)
    assert result.final_residual <= max(1e-9, result.residual_floor)


def test_warm_start_reuses_previous_direction(gaussian3):
    config = SolverConfig.build(panels=2000, r_star=10.0, sor_tol=1e-9)
    model = PowerModel(1.0)
    cold = steepest_direction(model, gaussian3, config)
    warm = steepest_direction(model, gaussian3, config, warm=cold.raw)
    assert warm.sor_iterations < cold.sor_iterations
    assert warm.raw_norm == pytest.approx(cold.raw_norm, rel=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_direction_decreases_action(seed):
    rng = np.random.default_rng(seed)
    grid = RadialGrid.uniform(10.0, 200)
    amplitude, width, bump = rng.uniform(1.0, 4.0), rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)
    w1 = RadialFunction.from_callable(
        grid, lambda r: (amplitude + bump * r * r) * np.exp(-width * r * r)
    )
    model = PowerModel(1.0)
    config = SolverConfig.build(panels=200, r_star=10.0, sor_tol=1e-10)
    direction = steepest_direction(model, w1, config).direction
    step = 1e-4
    assert (action_I(model, w1.axpy(step, direction)) - action_I(model, w1)) / step < 0


def test_residual_skips_end_rows():
    grid = RadialGrid.uniform(1.0, 10)
    zero = RadialFunction.zeros(grid)
    model = PowerModel(1.0)
    assert ode_residual(model, zero) == 0.0
    residual = radial_residual(model, RadialFunction(grid, np.ones(11)))
    assert residual[0] == residual[-1] == 0.0


def test_sor_agrees_with_banded_solver():
    system, _ = manufactured_system(300)
    interior = slice(1, system.grid.panels)
    banded = np.zeros((3, system.grid.panels - 1))
    banded[0, 1:] = system.upper[1:-2]
    banded[1, :] = system.diag[interior]
    banded[2, :-1] = system.lower[2:-1]
    reference = solve_banded((1, 1), banded, system.rhs[interior])
    solution = run_sor(system, 1.9, 1e-10, 1_000_000).solution.values
    assert np.max(np.abs(solution[interior] - reference)) < 1e-8


def test_sor_stops_at_rounding_floor():
    system, _ = manufactured_system(100)
    interior = slice(1, system.grid.panels)
    report = run_sor(system, 1.9, 1e-20, 1_000_000)
    assert report.iterations < 1_000_000
    assert report.residual <= report.residual_floor
    assert report.residual == pytest.approx(system.residual(report.solution.values))
    assert report.residual_floor == pytest.approx(system.residual_floor(report.solution.values))
    reference = run_sor(system, 1.9, 1e-10, 1_000_000).solution.values
    assert np.max(np.abs(report.solution.values[interior] - reference[interior])) < 1e-8


def test_floor_scales_with_operator_size():
    coarse, _ = manufactured_system(100)
    fine, _ = manufactured_system(1000)
    v = np.ones(coarse.grid.node_count)
    w = np.ones(fine.grid.node_count)
    assert fine.residual_floor(w) > 50 * coarse.residual_floor(v)
