import json
import os
import sys
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

import click

from pohozaev.settings import settings
from pohozaev.utils.exceptions import ErrorCode, ExitCode, MMAPException, handle_exception
from pohozaev.utils.logging import get_logger

logger = get_logger(__name__)


def _float_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f"Expected comma-separated numbers, got {value!r}")


def model_options(func):
    """模型选择与族参数"""
    options = [
        click.option('--model', 'model_name', type=click.Choice(['power', 'asym', 'quintic', 'nonmono']), default='power', help='Nonlinearity family'),
        click.option('--lambda', 'lam', type=float, default=1.0, help='Linear coefficient λ'),
        click.option('--s', type=float, default=None, help='Saturation parameter (asym / nonmono)'),
        click.option('--p', type=float, default=None, help='Power exponent (power)'),
        click.option('--B', 'B', type=float, default=None, help='Cubic coefficient (quintic)'),
        click.option('--C', 'C', type=float, default=None, help='Quartic coefficient (quintic)'),
        click.option('--D', 'D', type=float, default=None, help='Quintic coefficient (quintic)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def solver_options(func):
    """数值参数，未给出时取环境变量或默认值"""
    options = [
        click.option('--panels', type=int, default=None, help='Number of grid panels M'),
        click.option('--rstar', type=float, default=None, help='Initial extent R*'),
        click.option('--alpha0', type=float, default=None, help='Initial line-search step'),
        click.option('--alpha-min', type=float, default=None, help='Smallest line-search step'),
        click.option('--eps', type=float, default=None, help='Stop when ‖v‖ falls below this'),
        click.option('--sor-omega', type=float, default=None, help='SOR relaxation factor'),
        click.option('--sor-tol', type=float, default=None, help='SOR relative residual tolerance'),
        click.option('--reproject-every', type=int, default=None, help='Reprojection stride N_r'),
        click.option('--guess-amplitude', type=float, default=None, help='Initial guess amplitude'),
        click.option('--guess-width', type=float, default=None, help='Initial guess width'),
        click.option('--out', 'out', type=click.Path(file_okay=False), default=None, help='Output directory'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _solver_config(params: Dict[str, Any]):
    return settings.get_solver_config(
        panels=params.get('panels'),
        r_star=params.get('rstar'),
        alpha0=params.get('alpha0'),
        alpha_min=params.get('alpha_min'),
        eps_stop=params.get('eps'),
        sor_omega=params.get('sor_omega'),
        sor_tol=params.get('sor_tol'),
        reproject_stride=params.get('reproject_every'),
    )


def _guess(params: Dict[str, Any]) -> Dict[str, float]:
    from pohozaev.studies.runner import guess_options
    return guess_options(params.get('guess_amplitude'), params.get('guess_width'))


def _model(params: Dict[str, Any]):
    from pohozaev.models.nonlinearity import ModelFactory
    return ModelFactory.get_model(
        params['model_name'], params['lam'],
        s=params.get('s'), p=params.get('p'), B=params.get('B'), C=params.get('C'), D=params.get('D'),
    )


def _out_dir(command: str, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    timestamp = datetime.now(timezone.utc).strftime("%Y%m%d_%H%M%S")
    return Path(settings.output_dir) / f"{command}_{timestamp}"


@contextmanager
def command_run(command: str, out_dir: Path):
    """记录运行清单，并把异常映射为退出码"""
    from pohozaev.studies.output import RunManifest

    ctx = click.get_current_context()
    manifest = RunManifest(command=command, arguments=dict(ctx.params))
    try:
        yield manifest
    except click.ClickException:
        raise
    except Exception as e:
        info = handle_exception(e)
        logger.error(f"{info['error_code']} - {info['message']}")
        click.echo(f"Error [{info['error_code']}]: {info['message']}", err=True)
        if info['details']:
            click.echo(f"Details: {json.dumps(info['details'], default=str)}", err=True)
        manifest.finish(info['exit_code'])
        manifest.save(out_dir)
        sys.exit(info['exit_code'])
    manifest.finish(ExitCode.SUCCESS)
    manifest.save(out_dir)


def _echo_result(result) -> None:
    click.echo(f"Status: {result.status} ({result.stop_reason})")
    click.echo(f"  u(0)       = {result.u_at_zero:.5f}")
    click.echo(f"  I(u)       = {result.action:.5f}")
    click.echo(f"  ‖v‖        = {result.grad_norm:.3e}")
    click.echo(f"  iterations = {result.outer_iterations}, restarts = {result.restarts}")
    click.echo(f"  R* final   = {result.R_star_final:.4f}")


@click.group()
def cli():
    """Pohozaev MMAP CLI"""
    pass


@cli.command()
@model_options
@solver_options
@click.option('--seed', type=int, default=0, help='Seed for the guess perturbation')
@click.option('--perturb', type=float, default=0.0, help='Relative random perturbation of the initial guess')
def solve(**params):
    """求解单个问题"""
    from pohozaev.core.radial import RadialGrid
    from pohozaev.solver.mmap import STATUS_CONVERGED, initial_guess, perturb_guess
    from pohozaev.solver.mmap import solve as run_solve
    from pohozaev.studies.output import write_solve_outputs

    out_dir = _out_dir('solve', params['out'])
    with command_run('solve', out_dir) as manifest:
        config = _solver_config(params)
        model = _model(params)
        manifest.config = config.model_dump()
        manifest.model = model.describe()
        click.echo(f"Solving {model!r} with M = {config.panels}, R* = {config.r_star}")

        guess = initial_guess(
            amplitude=params['guess_amplitude'],
            width=params['guess_width'],
            grid=RadialGrid.uniform(config.r_star, config.panels),
        )
        if params['perturb']:
            guess = perturb_guess(guess, params['perturb'], params['seed'])
        result = run_solve(model, config, guess)
        manifest.outputs = write_solve_outputs(out_dir, result)
        _echo_result(result)
        click.echo(f"Results written to: {out_dir}")
        if result.status != STATUS_CONVERGED:
            raise MMAPException(
                ErrorCode.NON_CONVERGENCE,
                f"Solve ended with status {result.status}",
                ExitCode.NON_CONVERGENCE,
                {"stop_reason": result.stop_reason},
            )


@cli.command()
@click.option('--model', 'model_name', type=click.Choice(['power', 'asym', 'nonmono']), default='asym', help='Nonlinearity family')
@click.option('--lambdas', callback=_float_list, required=True, help='Comma-separated λ values')
@click.option('--s-values', callback=_float_list, default=None, help='Comma-separated s values')
@click.option('--p', type=float, default=None, help='Power exponent (power)')
@click.option('--parallel', type=int, default=None, help='Worker threads')
@solver_options
def sweep(**params):
    """(λ, s) 参数扫描"""
    from pohozaev.studies.runner import SweepRunner

    out_dir = _out_dir('sweep', params['out'])
    with command_run('sweep', out_dir) as manifest:
        config = _solver_config(params)
        manifest.config = config.model_dump()
        manifest.model = {"model": params['model_name']}
        extra = {'p': params['p']} if params['p'] is not None else {}
        runner = SweepRunner(
            params['model_name'], config, parallel=params['parallel'], params=extra, guess=_guess(params),
        )
        cells = runner.run(params['lambdas'], params['s_values'])
        manifest.outputs = [runner.write(cells, out_dir)]
        for cell in cells:
            u0 = f"{cell.result.u_at_zero:.5f}" if cell.result is not None else "--"
            click.echo(f"  s={cell.s}  lambda={cell.lam}  u0={u0}  [{cell.status}]")
        click.echo(f"Grid written to: {manifest.outputs[0]}")


@cli.command()
@click.argument('kind', type=click.Choice(['convergence', 'domain', 'robustness']))
@model_options
@solver_options
def study(kind, **params):
    """网格收敛 / 区间长度 / 稳健性研究"""
    from pohozaev.studies.output import write_json
    from pohozaev.studies.runner import StudyRunner

    out_dir = _out_dir(f'study_{kind}', params['out'])
    with command_run('study', out_dir) as manifest:
        config = _solver_config(params)
        model = _model(params)
        manifest.config = config.model_dump()
        manifest.model = model.describe()
        report = StudyRunner(model, config, guess=_guess(params)).run(kind)
        manifest.outputs = [
            StudyRunner.write(report, out_dir),
            str(write_json(out_dir / "study.json", report.summary)),
        ]
        for row in report.rows:
            click.echo("  " + ", ".join(str(v) for v in row))
        click.echo(f"Summary: {json.dumps(report.summary, default=str)}")


@cli.command()
@click.argument('kind', type=click.Choice(['two-maxima', 'nonmonotone']))
@solver_options
def demo(kind, **params):
    """双峰纤维 / 非单调示例"""
    from pohozaev.studies.runner import DemoRunner

    out_dir = _out_dir(f'demo_{kind}', params['out'])
    with command_run('demo', out_dir) as manifest:
        config = _solver_config(params)
        manifest.config = config.model_dump()
        report = DemoRunner(config, guess=_guess(params)).run(kind, out_dir)
        manifest.outputs = report.outputs
        if kind == 'two-maxima':
            click.echo(f"Fiber maxima: {report.summary['maxima_count']}")
            for item in report.summary['maxima']:
                click.echo(f"  t = {item['t']:.4f}, I = {item['I']:.5f}")
            click.echo(f"Expected level: {report.summary['expected_level']:.5f}")
        else:
            click.echo(f"f(u)/u monotone on (0, 3]: {report.summary['monotone']}")
        _echo_result(report.result)


@cli.command()
@click.argument('table', type=click.Choice(['power-heights', 'asym-grid', 'asym-profile']))
@click.option('--panels', type=int, default=None, help='Override the table grid panels')
@click.option('--rstar', type=float, default=None, help='Override the table initial extent')
@click.option('--parallel', type=int, default=None, help='Worker threads')
@click.option('--dataset', 'dataset_path', type=click.Path(exists=True, dir_okay=False), default=None, help='Reference tables JSON')
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None, help='Output directory')
def reproduce(table, panels, rstar, parallel, dataset_path, out):
    """复现参考表"""
    from pohozaev.studies.metrics import StudyMetrics
    from pohozaev.studies.output import write_json
    from pohozaev.studies.reference import ReferenceDataset
    from pohozaev.studies.runner import ReproductionRunner

    out_dir = _out_dir(f'reproduce_{table}', out)
    with command_run('reproduce', out_dir) as manifest:
        runner = ReproductionRunner(
            settings.get_solver_config(),
            dataset=ReferenceDataset(dataset_path),
            parallel=parallel,
            overrides={'panels': panels, 'r_star': rstar},
        )
        manifest.config = runner.table_config(table).model_dump()
        comparisons = runner.run(table)
        ReproductionRunner.print_report(table, comparisons)
        summary = StudyMetrics.aggregate(comparisons)
        summary['solver'] = manifest.config
        manifest.outputs = [
            ReproductionRunner.write(comparisons, out_dir),
            str(write_json(out_dir / "report.json", summary)),
        ]
        click.echo(f"Passed {summary['passed']}/{summary['total']}, max relative error {summary['max_relative_error']:.2e}")
        ReproductionRunner.check(comparisons)


@cli.command()
@click.argument('manifest_path', type=click.Path(exists=True))
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None, help='Output directory for the replayed run')
@click.pass_context
def replay(ctx, manifest_path, out):
    """按运行清单重放"""
    from pohozaev.studies.output import RunManifest, find_manifest

    manifest = RunManifest.load(find_manifest(manifest_path))
    command = cli.get_command(ctx, manifest.command)
    if command is None or manifest.command == 'replay':
        raise click.BadParameter(f"Cannot replay command {manifest.command!r}")
    arguments = dict(manifest.arguments)
    if out:
        arguments['out'] = out
    click.echo(f"Replaying {manifest.command} from {manifest_path}")
    ctx.invoke(command, **arguments)


@cli.command()
def init():
    """初始化输出与日志目录"""
    click.echo("Initializing Pohozaev MMAP")
    directories = [settings.output_dir]
    if settings.log_file:
        directories.append(str(Path(settings.log_file).parent))
    for dir_path in directories:
        os.makedirs(dir_path, exist_ok=True)
    click.echo("Initialization completed successfully")


if __name__ == '__main__':
    cli()
