import numpy as np
import pytest

from pohozaev.core.radial import RadialFunction, RadialGrid, grad_l2_sq
from pohozaev.models.nonlinearity import ModelFactory
from pohozaev.settings import SolverConfig
from pohozaev.solver import mmap
from pohozaev.solver.descent import DescentDirection, ode_residual_ratio, steepest_direction
from pohozaev.solver.energy import g_integral, project
from pohozaev.solver.mmap import (
    LINE_MINIMUM,
    STATUS_CONVERGED,
    STATUS_RESTARTED_EXHAUSTED,
    STATUS_STALLED,
    initial_guess,
    line_minimize,
    perturb_guess,
    profile_scaling_error,
    scaling_check,
    solve,
)
from pohozaev.utils.exceptions import FlatLandscapeError, InfeasibleGuessError, InvalidParameterError

POWER_U0 = 4.33691
POWER_ACTION = 18.89734


@pytest.fixture(scope="module")
def coarse_config():
    return SolverConfig.build(
        panels=200,
        r_star=12.0,
        alpha_min=1e-6,
        sor_tol=1e-8,
        eps_stop=1e-2,
        max_outer_iterations=2000,
    )


@pytest.fixture(scope="module")
def coarse_solution(coarse_config):
    """粗网格上从 sech 初值出发的立方基态"""
    guess = initial_guess("sech", amplitude=4.0, width=1.0, grid=RadialGrid.uniform(12.0, 200))
    return solve(ModelFactory.get_model("power", 1.0), coarse_config, guess)


def test_default_guess():
    guess = initial_guess(grid=RadialGrid.uniform(1.0, 1000))
    assert guess.at_origin == pytest.approx(100.0)
    assert guess.values[-1] == 0.0
    assert np.all(np.diff(guess.values) <= 0)


def test_default_guess_is_projectable(power_model):
    guess = initial_guess(grid=RadialGrid.uniform(1.0, 1000))
    assert g_integral(power_model, guess) > 0
    assert project(power_model, guess).t_star > 0


def test_guess_rejects_unknown_kind_and_bad_parameters():
    with pytest.raises(InvalidParameterError):
        initial_guess("box")
    with pytest.raises(InvalidParameterError):
        initial_guess(amplitude=-1.0)


def test_perturbation_is_reproducible():
    guess = initial_guess(grid=RadialGrid.uniform(1.0, 100))
    first = perturb_guess(guess, 0.05, seed=7)
    second = perturb_guess(guess, 0.05, seed=7)
    assert np.array_equal(first.values, second.values)
    assert not np.array_equal(first.values, guess.values)
    assert np.all(np.abs(first.values - guess.values) <= 0.05 * np.abs(guess.values) + 1e-15)
    assert first.values[-1] == 0.0
    with pytest.raises(InvalidParameterError):
        perturb_guess(guess, -0.1)


def test_infeasible_guess_is_rejected(power_model, coarse_config):
    guess = initial_guess(amplitude=0.01, grid=RadialGrid.uniform(12.0, 200))
    with pytest.raises(InfeasibleGuessError) as excinfo:
        solve(power_model, coarse_config, guess)
    assert excinfo.value.details["g_integral"] <= 0


def test_zero_guess_is_rejected(power_model, coarse_config):
    with pytest.raises(InvalidParameterError):
        solve(power_model, coarse_config, RadialFunction.zeros(RadialGrid.uniform(12.0, 200)))


class TestLineSearch:

    @pytest.fixture
    def config(self):
        return SolverConfig.build(alpha0=0.1, alpha_min=1e-6)

    def test_locates_quadratic_minimum(self, power_model, gaussian3, config):
        outcome = line_minimize(power_model, gaussian3, gaussian3, config, objective=lambda a: (a - 0.37) ** 2)
        assert outcome.kind == LINE_MINIMUM
        assert outcome.offset == pytest.approx(0.37, abs=10 * config.alpha_min)

    def test_minimum_between_coarse_steps(self, power_model, gaussian3, config):
        outcome = line_minimize(power_model, gaussian3, gaussian3, config, objective=lambda a: (a - 0.0123) ** 2)
        assert outcome.offset == pytest.approx(0.0123, abs=10 * config.alpha_min)

    def test_ascent_direction_keeps_start(self, power_model, gaussian3, config):
        outcome = line_minimize(power_model, gaussian3, gaussian3, config, objective=lambda a: (a + 0.37) ** 2)
        assert outcome.offset == 0.0
        assert outcome.value == pytest.approx(0.37 ** 2)

    def test_skips_local_maximum(self, power_model, gaussian3, config):
        # 在 0.2 处有一个孤立的尖峰，真正的最低点在 0.5
        def objective(a):
            return (a - 0.5) ** 2 + (1.0 if abs(a - 0.2) < 1e-9 else 0.0)

        outcome = line_minimize(power_model, gaussian3, gaussian3, config, objective=objective)
        assert outcome.offset == pytest.approx(0.5, abs=10 * config.alpha_min)

    def test_monotone_decrease_requests_restart(self, power_model, gaussian3):
        config = SolverConfig.build(alpha0=0.1, alpha_min=1e-6, line_search_cap=50)
        outcome = line_minimize(power_model, gaussian3, gaussian3, config, objective=lambda a: -a)
        assert outcome.needs_restart
        assert outcome.offset == 0.0

    def test_flat_objective_fails(self, power_model, gaussian3):
        config = SolverConfig.build(alpha0=0.1, alpha_min=1e-6, line_search_cap=20)
        with pytest.raises(FlatLandscapeError):
            line_minimize(power_model, gaussian3, gaussian3, config, objective=lambda a: 1.0)


def test_coarse_solve_converges(coarse_solution):
    assert coarse_solution.status == STATUS_CONVERGED
    assert coarse_solution.u_at_zero == pytest.approx(POWER_U0, rel=0.1)
    assert coarse_solution.action == pytest.approx(POWER_ACTION, rel=0.1)
    assert coarse_solution.solution.values.min() >= -1e-8


def test_trace_action_is_nonincreasing_between_restarts(coarse_solution):
    trace = coarse_solution.trace
    assert trace[0].restart
    assert trace[0].iteration == 0
    for previous, current in zip(trace, trace[1:]):
        assert current.iteration >= previous.iteration
        if not current.restart:
            assert current.action <= previous.action + 1e-12 * abs(previous.action)
    assert trace[-1].grad_norm == coarse_solution.grad_norm


def test_solution_lies_on_manifold(coarse_solution):
    power_model = ModelFactory.get_model("power", 1.0)
    assert project(power_model, coarse_solution.solution).t_star == pytest.approx(1.0, abs=1e-10)


def test_summary_fields(coarse_solution):
    summary = coarse_solution.summary()
    assert set(summary) == {"u0", "action", "v_norm", "iterations", "restarts", "status", "R_star_final"}
    assert summary["R_star_final"] == coarse_solution.solution.grid.extent


def test_scaling_check_is_trivial_at_unit_lambda(coarse_solution):
    assert scaling_check(coarse_solution, 1.0) == 0.0


@pytest.mark.slow
def test_power_ground_state(power_solution):
    assert power_solution.status == STATUS_CONVERGED
    assert power_solution.u_at_zero == pytest.approx(POWER_U0, rel=1e-3)
    assert power_solution.action == pytest.approx(POWER_ACTION, rel=1e-3)


@pytest.mark.slow
def test_power_ground_state_satisfies_pohozaev_identity(power_solution):
    model = ModelFactory.get_model("power", 1.0)
    u = power_solution.solution
    assert grad_l2_sq(u) == pytest.approx(6.0 * g_integral(model, u), rel=1e-4)


@pytest.mark.slow
def test_power_ground_state_is_positive_and_decreasing(power_solution):
    values = power_solution.solution.values
    assert values.min() >= -1e-8
    assert np.all(np.diff(values) <= 1e-8)


@pytest.mark.slow
def test_power_ground_state_solves_the_ode(power_solution):
    assert ode_residual_ratio(ModelFactory.get_model("power", 1.0), power_solution.solution) <= 1e-2


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.1, 0.5, 2.0, 3.0])
def test_power_scaling(power_solution, standard_config, lam):
    lam_result = solve(ModelFactory.get_model("power", lam), standard_config)
    assert lam_result.status == STATUS_CONVERGED
    assert scaling_check(power_solution, lam, lam_result=lam_result) <= 1e-3
    radii = np.linspace(0.0, 2.5, 10) / np.sqrt(lam)
    assert profile_scaling_error(power_solution, lam_result, lam, radii) <= 5e-3


@pytest.fixture(scope="module")
def asym_solution(standard_config):
    return solve(ModelFactory.get_model("asym", 1.0, s=0.5), standard_config.with_overrides(panels=3500))


@pytest.mark.slow
def test_asym_ground_state(asym_solution):
    assert asym_solution.status == STATUS_CONVERGED
    assert asym_solution.u_at_zero == pytest.approx(5.64139, rel=5e-3)
    assert asym_solution.action == pytest.approx(161.92929, rel=1e-2)
    assert asym_solution.solution.values.min() >= -1e-8


@pytest.mark.slow
def test_asym_profile_values(asym_solution):
    radii = [0.402, 1.601, 3.002, 5.005]
    expected = np.array([5.50879, 3.80120, 1.23610, 0.11309])
    assert asym_solution.solution.interpolate(radii) == pytest.approx(expected, rel=1e-2)


def test_zero_steps_end_as_stalled(power_model):
    config = SolverConfig.build(panels=200, alpha_min=1e-2, eps_stop=1e-8)
    result = solve(power_model, config)
    assert result.status == STATUS_STALLED
    assert result.stop_reason == "zero_step"
    assert result.grad_norm >= config.eps_stop
    assert [record.alpha for record in result.trace[-config.stall_patience:]] == [0.0] * config.stall_patience


def test_monotone_line_requests_feasible_restart(power_model, gaussian3):
    w1 = project(power_model, gaussian3).projected
    config = SolverConfig.build(panels=2000, r_star=10.0, sor_tol=1e-9, alpha0=1e-3, alpha_min=1e-6, line_search_cap=3)
    direction = steepest_direction(power_model, w1, config).direction
    outcome = line_minimize(power_model, w1, direction, config)
    assert outcome.needs_restart
    assert 0 < outcome.k0 <= config.line_search_cap
    assert g_integral(power_model, outcome.restart_point) > 0
    assert np.allclose(outcome.restart_point.values, w1.axpy(outcome.k0 * config.alpha0, direction).values)


def test_restart_budget_is_enforced(power_model):
    config = SolverConfig.build(
        panels=200, r_star=12.0, sor_tol=1e-8, alpha0=1e-4, alpha_min=1e-6, line_search_cap=3, max_restarts=2,
    )
    guess = initial_guess("sech", amplitude=4.0, width=1.0, grid=RadialGrid.uniform(12.0, 200))
    result = solve(power_model, config, guess)
    assert result.status == STATUS_RESTARTED_EXHAUSTED
    assert result.restarts == config.max_restarts + 1
    restart_records = [record for record in result.trace if record.restart]
    assert len(restart_records) == config.max_restarts + 1
    assert all(record.alpha == 0.0 or record.alpha == pytest.approx(3e-4) for record in restart_records)


def test_positive_part_replaces_sign_changing_solution(power_model):
    grid = RadialGrid.uniform(12.0, 200)
    guess = initial_guess("sech", amplitude=4.0, width=1.0, grid=grid)
    nodal = guess.with_values(guess.values - 0.5 * np.exp(-((grid.nodes - 4.0) ** 2)))
    replacement = mmap._positive_part_guess(power_model, nodal, guess)
    assert replacement.values.min() >= 0.0
    negative = guess.with_values(-guess.values)
    assert mmap._positive_part_guess(power_model, negative, guess) is guess


def test_sign_change_triggers_positivity_restart(monkeypatch, power_model, coarse_config):
    grid = RadialGrid.uniform(12.0, 200)
    guess = initial_guess("sech", amplitude=4.0, width=1.0, grid=grid)
    nodal = guess.with_values(guess.values - 0.5 * np.exp(-((grid.nodes - 4.0) ** 2)))
    zero = RadialFunction.zeros(grid)
    descend = mmap._descend
    starts = []

    def first_descent_changes_sign(model, config, w0, state):
        starts.append(w0)
        if len(starts) == 1:
            return nodal, DescentDirection(zero, zero, 0.0, 0, 0.0), STATUS_CONVERGED, "eps"
        return descend(model, config, w0, state)

    monkeypatch.setattr(mmap, "_descend", first_descent_changes_sign)
    result = solve(power_model, coarse_config, guess)
    assert result.positivity_restarts == 1
    assert len(starts) == 2
    assert starts[1].values.min() >= 0.0
    assert result.status == STATUS_CONVERGED
    assert result.solution.values.min() >= -coarse_config.positivity_tol


def test_persistent_sign_change_exhausts_positivity_restarts(monkeypatch, power_model, coarse_config):
    grid = RadialGrid.uniform(12.0, 200)
    guess = initial_guess("sech", amplitude=4.0, width=1.0, grid=grid)
    nodal = guess.with_values(guess.values - 0.5 * np.exp(-((grid.nodes - 4.0) ** 2)))
    zero = RadialFunction.zeros(grid)
    monkeypatch.setattr(
        mmap, "_descend",
        lambda model, config, w0, state: (nodal, DescentDirection(zero, zero, 0.0, 0, 0.0), STATUS_CONVERGED, "eps"),
    )
    result = solve(power_model, coarse_config, guess)
    assert result.status == STATUS_RESTARTED_EXHAUSTED
    assert result.stop_reason == "sign_change"
    assert result.positivity_restarts == mmap.MAX_POSITIVITY_RESTARTS + 1
