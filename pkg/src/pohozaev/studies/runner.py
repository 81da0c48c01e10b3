"""参数扫描、数值研究、示例与结果复现。"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np

from pohozaev.core.radial import RadialGrid
from pohozaev.models.nonlinearity import ModelFactory, NonlinearityModel, monotonicity_probe
from pohozaev.models.profiles import (
    TWO_MAXIMA_LAMBDA,
    TWO_MAXIMA_LEVEL,
    quintic_calibration,
    sample_ratio,
    two_maxima_profile,
)
from pohozaev.settings import SolverConfig, settings
from pohozaev.solver.energy import fiber_scan
from pohozaev.solver.mmap import SolveResult, initial_guess, solve
from pohozaev.studies.metrics import CellComparison, StudyMetrics
from pohozaev.studies.output import write_json, write_rows, write_solve_outputs
from pohozaev.studies.reference import ReferenceDataset
from pohozaev.utils.exceptions import InfeasibleFamilyError, MMAPException, ReproductionFailure
from pohozaev.utils.logging import get_logger

logger = get_logger(__name__)

CONVERGENCE_PANELS = (100, 200, 400, 800, 1600)
DOMAIN_SPACINGS = (0.00125, 0.0025, 0.005)
DOMAIN_EXTENTS = (1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 20.0)
DOMAIN_EPS = 1e-12
DOMAIN_SLOPE_RANGE = (1.0, 8.0)
DOMAIN_PLATEAU = (10.0, 20.0)
ROBUSTNESS_COARSE = {"panels": 30, "alpha_min": 1e-2, "sor_tol": 1e-2}
FIBER_SAMPLES = 1000
FIBER_T_MAX = 4.0
NONMONO_LAMBDA = 0.3
NONMONO_S = 1.0
NONMONO_U_MAX = 3.0


def solve_with_guess(model: NonlinearityModel, config: SolverConfig, amplitude: Optional[float] = None, width: Optional[float] = None) -> SolveResult:
    """在配置的初始区间上用高斯初值求解，未给出的幅度与宽度取 settings"""
    guess = initial_guess(
        amplitude=amplitude,
        width=width,
        grid=RadialGrid.uniform(config.r_star, config.panels),
    )
    return solve(model, config, guess)


def guess_options(amplitude: Optional[float] = None, width: Optional[float] = None) -> Dict[str, float]:
    """命令行给出的初值参数，None 表示沿用默认值"""
    return {k: v for k, v in (('amplitude', amplitude), ('width', width)) if v is not None}


@dataclass
class SweepCell:
    lam: float
    s: Optional[float]
    result: Optional[SolveResult] = None
    status: str = ""

    @property
    def key(self) -> Tuple[float, float]:
        return (self.s if self.s is not None else -1.0, self.lam)

    def row(self) -> List[Any]:
        if self.result is None:
            return [self.s, self.lam, None, None, None, self.status]
        return [self.s, self.lam, self.result.u_at_zero, self.result.action, self.result.grad_norm, self.status]


class SweepRunner:
    """(λ, s) 网格上的独立求解，按固定顺序输出"""

    HEADER = ("s", "lambda", "u0", "I", "v_norm", "status")

    def __init__(
        self,
        model_name: str,
        config: SolverConfig,
        parallel: Optional[int] = None,
        params: Optional[Dict[str, float]] = None,
        guess: Optional[Dict[str, float]] = None,
    ):
        self.model_name = model_name
        self.config = config
        self.parallel = parallel or settings.sweep_workers
        self.params = params or {}
        self.guess = guess or {}

    def _run_cell(self, cell: SweepCell) -> SweepCell:
        params = dict(self.params)
        if cell.s is not None:
            params['s'] = cell.s
        try:
            model = ModelFactory.get_model(self.model_name, cell.lam, **params)
            cell.result = solve_with_guess(model, self.config, **self.guess)
            cell.status = cell.result.status
        except InfeasibleFamilyError:
            cell.status = "infeasible"
        except MMAPException as e:
            logger.warning(f"Cell s={cell.s}, lambda={cell.lam} failed: {e.error_code} - {e.message}")
            cell.status = e.error_code
        return cell

    def run(self, lambdas: Sequence[float], s_values: Optional[Sequence[float]]) -> List[SweepCell]:
        cells = [SweepCell(lam=lam, s=s) for s in (s_values or [None]) for lam in lambdas]
        if self.parallel > 1:
            with ThreadPoolExecutor(max_workers=self.parallel) as executor:
                cells = list(executor.map(self._run_cell, cells))
        else:
            cells = [self._run_cell(cell) for cell in cells]
        return sorted(cells, key=lambda c: c.key)

    def write(self, cells: List[SweepCell], out_dir: Path) -> str:
        return str(write_rows(Path(out_dir) / "grid.csv", self.HEADER, (c.row() for c in cells)))


@dataclass
class StudyReport:
    kind: str
    header: Tuple[str, ...]
    rows: List[List[Any]]
    summary: Dict[str, Any] = field(default_factory=dict)


class StudyRunner:
    """网格收敛、区间长度与粗参数稳健性研究"""

    def __init__(self, model: NonlinearityModel, config: SolverConfig, guess: Optional[Dict[str, float]] = None):
        self.model = model
        self.config = config
        self.guess = guess or {}

    def _solve(self, config: SolverConfig) -> SolveResult:
        return solve_with_guess(self.model, config, **self.guess)

    def convergence(self, panels: Sequence[int] = CONVERGENCE_PANELS) -> StudyReport:
        rows = []
        for m in panels:
            result = self._solve(self.config.with_overrides(panels=int(m)))
            rows.append([int(m), result.u_at_zero, result.action])
        actions = [row[2] for row in rows]
        return StudyReport(
            kind="convergence",
            header=("M", "u0", "I"),
            rows=rows,
            summary={"successive_action_differences": StudyMetrics.successive_differences(actions)},
        )

    def domain(self, spacings: Sequence[float] = DOMAIN_SPACINGS, extents: Sequence[float] = DOMAIN_EXTENTS) -> StudyReport:
        """固定初始步长，改变初始区间，记录最终 R* 与 ‖v‖

        ‖v‖ 对初始区间长度在 DOMAIN_SLOPE_RANGE 内做对数斜率，
        DOMAIN_PLATEAU 两端的比值（大比小）衡量平台。
        """
        rows = []
        for dr in spacings:
            for extent in extents:
                config = self.config.with_overrides(
                    r_star=float(extent),
                    panels=max(4, int(round(extent / dr))),
                    eps_stop=DOMAIN_EPS,
                )
                result = self._solve(config)
                rows.append([dr, extent, result.R_star_final, result.grad_norm, result.status])
        low, high = DOMAIN_SLOPE_RANGE
        slopes, plateaus = {}, {}
        for dr in spacings:
            subset = [row for row in rows if row[0] == dr]
            fitted = [row for row in subset if low <= row[1] <= high]
            slopes[str(dr)] = StudyMetrics.loglog_slope([r[1] for r in fitted], [r[3] for r in fitted])
            norms = {row[1]: row[3] for row in subset}
            if all(extent in norms for extent in DOMAIN_PLATEAU):
                plateaus[str(dr)] = StudyMetrics.plateau_ratio(*(norms[extent] for extent in DOMAIN_PLATEAU))
        return StudyReport(
            kind="domain",
            header=("dr", "R_star_initial", "R_star", "v_norm", "status"),
            rows=rows,
            summary={
                "slope_range": list(DOMAIN_SLOPE_RANGE),
                "loglog_slopes": slopes,
                "plateau_extents": list(DOMAIN_PLATEAU),
                "plateau_ratios": plateaus,
            },
        )

    def robustness(self) -> StudyReport:
        standard = self._solve(self.config)
        coarse = self._solve(self.config.with_overrides(**ROBUSTNESS_COARSE))
        difference = StudyMetrics.relative_error(coarse.action, standard.action)
        return StudyReport(
            kind="robustness",
            header=("run", "M", "alpha_min", "sor_tol", "u0", "I"),
            rows=[
                ["standard", self.config.panels, self.config.alpha_min, self.config.sor_tol, standard.u_at_zero, standard.action],
                ["coarse", ROBUSTNESS_COARSE["panels"], ROBUSTNESS_COARSE["alpha_min"], ROBUSTNESS_COARSE["sor_tol"], coarse.u_at_zero, coarse.action],
            ],
            summary={"relative_action_difference": difference},
        )

    def run(self, kind: str) -> StudyReport:
        if kind == "convergence":
            return self.convergence()
        elif kind == "domain":
            return self.domain()
        elif kind == "robustness":
            return self.robustness()
        raise click.BadParameter(f"Unknown study: {kind}")

    @staticmethod
    def write(report: StudyReport, out_dir: Path) -> str:
        return str(write_rows(Path(out_dir) / "study.csv", report.header, report.rows, formatter=_cell))


@dataclass
class DemoReport:
    kind: str
    summary: Dict[str, Any]
    outputs: List[str]
    result: Optional[SolveResult] = None


class DemoRunner:
    """双峰纤维与非单调 f(u)/u 两个示例"""

    def __init__(self, config: SolverConfig, guess: Optional[Dict[str, float]] = None):
        self.config = config
        self.guess = guess or {}

    def two_maxima(self, out_dir: Path) -> DemoReport:
        calibration = quintic_calibration(TWO_MAXIMA_LAMBDA)
        model = ModelFactory.get_model("quintic", TWO_MAXIMA_LAMBDA, **calibration.coefficients())
        profile = two_maxima_profile()
        t = np.linspace(FIBER_T_MAX / FIBER_SAMPLES, FIBER_T_MAX, FIBER_SAMPLES)
        scan = fiber_scan(model, profile, t)
        maxima = scan.interior_maxima()
        outputs = [str(write_rows(Path(out_dir) / "fiber.csv", ("t", "I"), scan.rows()))]

        result = solve_with_guess(model, self.config, **self.guess)
        outputs += write_solve_outputs(out_dir, result)
        summary = {
            "maxima_count": len(maxima),
            "maxima": [{"t": t_max, "I": value} for t_max, value in maxima],
            "expected_level": TWO_MAXIMA_LEVEL,
            "calibration": calibration.to_dict(),
            "solve": result.summary(),
            "positive": bool(result.solution.values.min() >= -self.config.positivity_tol),
        }
        outputs.append(str(write_json(Path(out_dir) / "demo.json", summary)))
        return DemoReport("two-maxima", summary, outputs, result)

    def nonmonotone(self, out_dir: Path, lam: float = NONMONO_LAMBDA, s: float = NONMONO_S) -> DemoReport:
        model = ModelFactory.get_model("nonmono", lam, s=s)
        u, fu, ratio = sample_ratio(model, NONMONO_U_MAX)
        outputs = [str(write_rows(Path(out_dir) / "fratio.csv", ("u", "f", "f_over_u"), zip(u, fu, ratio)))]
        monotone = monotonicity_probe(model, u)

        result = solve_with_guess(model, self.config, **self.guess)
        outputs += write_solve_outputs(out_dir, result)
        summary = {"monotone": monotone, "model": model.describe(), "solve": result.summary()}
        outputs.append(str(write_json(Path(out_dir) / "demo.json", summary)))
        return DemoReport("nonmonotone", summary, outputs, result)

    def run(self, kind: str, out_dir: Path) -> DemoReport:
        if kind == "two-maxima":
            return self.two_maxima(out_dir)
        elif kind == "nonmonotone":
            return self.nonmonotone(out_dir)
        raise click.BadParameter(f"Unknown demo: {kind}")


class ReproductionRunner:
    """按参考表重新求解并逐格比较"""

    def __init__(
        self,
        config: SolverConfig,
        dataset: Optional[ReferenceDataset] = None,
        parallel: Optional[int] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ):
        self.config = config
        self.dataset = dataset or ReferenceDataset()
        self.parallel = parallel
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    def table_config(self, table: str) -> SolverConfig:
        """表内记录的网格参数，命令行显式给出的参数优先"""
        return self.config.with_overrides(**{**self.dataset.get_solver_overrides(table), **self.overrides})

    def power_heights(self) -> List[CellComparison]:
        tolerance = self.dataset.get_tolerance('power-heights')
        params = self.dataset.get_table('power-heights').get('parameters', {})
        config = self.table_config('power-heights')
        comparisons = []
        for item in self.dataset.get_items('power-heights'):
            result = solve_with_guess(ModelFactory.get_model('power', item['lambda'], **params), config)
            comparisons.append(StudyMetrics.compare(item['id'], 'u0', result.u_at_zero, item['u0'], tolerance))
            comparisons.append(StudyMetrics.compare(item['id'], 'I', result.action, item['action'], tolerance))
        return comparisons

    def asym_grid(self) -> List[CellComparison]:
        table = self.dataset.get_table('asym-grid')
        tolerance = self.dataset.get_tolerance('asym-grid')
        s_values = sorted({item['s'] for item in table['items']})
        sweep = SweepRunner('asym', self.table_config('asym-grid'), parallel=self.parallel)
        comparisons = []
        for cell in sweep.run(table['lambdas'], s_values):
            computed = cell.result.u_at_zero if cell.result is not None else None
            reference = self.dataset.asym_cell(cell.s, cell.lam)
            comparisons.append(StudyMetrics.compare(f"s={cell.s},lambda={cell.lam}", 'u0', computed, reference, tolerance))
        return comparisons

    def asym_profile(self) -> List[CellComparison]:
        table = self.dataset.get_table('asym-profile')
        model = ModelFactory.get_model('asym', table['lambda'], **table.get('parameters', {}))
        result = solve_with_guess(model, self.table_config('asym-profile'))
        items = table['items']
        computed = result.solution.interpolate([item['r'] for item in items])
        comparisons = [
            StudyMetrics.compare_profile_value(
                f"r={item['r']:.3f}", float(value), item['u'],
                table['tolerance'], table['tail_threshold'], table['tail_tolerance'],
            )
            for item, value in zip(items, computed)
        ]
        comparisons.append(StudyMetrics.compare('summary', 'I', result.action, table["summary"]["action"], table["tolerance"]))
        return comparisons

    def run(self, table: str) -> List[CellComparison]:
        if table == 'power-heights':
            return self.power_heights()
        elif table == 'asym-grid':
            return self.asym_grid()
        elif table == 'asym-profile':
            return self.asym_profile()
        raise click.BadParameter(f"Unknown table: {table}")

    @staticmethod
    def print_report(table: str, comparisons: List[CellComparison]) -> None:
        """并列打印参考值与计算值"""
        click.echo(f"\n{'='*72}")
        click.echo(f"REPRODUCTION: {table}")
        click.echo(f"{'='*72}")
        click.echo(f"{'cell':<22}{'qty':<5}{'reference':>14}{'computed':>14}{'rel.err':>11}  result")
        for c in comparisons:
            error = f"{c.relative_error:.2e}" if c.relative_error is not None else "--"
            click.echo(
                f"{c.cell:<22}{c.quantity:<5}{_cell(c.reference):>14}{_cell(c.computed):>14}{error:>11}  "
                f"{'PASS' if c.passed else 'FAIL'}"
            )
        click.echo(f"{'='*72}\n")

    @staticmethod
    def check(comparisons: List[CellComparison]) -> None:
        failing = StudyMetrics.aggregate(comparisons)['failing_cells']
        if failing:
            raise ReproductionFailure(f"{len(failing)} cells outside tolerance", failing_cells=failing)

    @staticmethod
    def write(comparisons: List[CellComparison], out_dir: Path) -> str:
        rows = (
            (c.cell, c.quantity, c.reference, c.computed, c.relative_error, c.tolerance, "pass" if c.passed else "fail")
            for c in comparisons
        )
        header = ("cell", "quantity", "reference", "computed", "relative_error", "tolerance", "result")
        return str(write_rows(Path(out_dir) / "report.csv", header, rows, formatter=_cell))


def _cell(value: Any) -> str:
    if value is None:
        return "--"
    if isinstance(value, (str, int)):
        return str(value)
    # 步长、容差与尾部数值保留科学计数
    if 0 < abs(value) < 1e-2:
        return format(value, '.5e')
    return f"{value:.5f}"
