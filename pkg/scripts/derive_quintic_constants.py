"""打印双峰示例的五次非线性项系数 B、C、D 及标定残差。

用法: python scripts/derive_quintic_constants.py [--lambda 3.0] [--radius 3.075]
"""
import json

import click

from pohozaev.models.profiles import (
    DEMO_PROFILE_RADIUS,
    TWO_MAXIMA_LAMBDA,
    TWO_MAXIMA_LEVEL,
    closed_form_gradient,
    closed_form_moment,
    quintic_calibration,
)


@click.command()
@click.option('--lambda', 'lam', type=float, default=TWO_MAXIMA_LAMBDA)
@click.option('--radius', type=float, default=DEMO_PROFILE_RADIUS)
def main(lam, radius):
    calibration = quintic_calibration(lam, radius)
    click.echo(json.dumps(calibration.to_dict(), indent=2))
    click.echo("Closed-form moments for comparison:")
    click.echo(f"  grad: {closed_form_gradient(radius):.8f}")
    for p in (2, 3, 4, 5):
        click.echo(f"  p={p}:  {closed_form_moment(p, radius):.8f}")
    t1, t2 = calibration.fiber_maxima_abscissae
    click.echo(f"Fiber maxima at t = {t1:.6f}, {t2:.6f}, level {TWO_MAXIMA_LEVEL:.6f}")


if __name__ == '__main__':
    main()
