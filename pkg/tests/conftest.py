import json

import numpy as np
import pytest

from pohozaev.core.radial import RadialFunction, RadialGrid
from pohozaev.models.nonlinearity import ModelFactory
from pohozaev.settings import SolverConfig


def gaussian(grid: RadialGrid, amplitude: float = 1.0, width: float = 1.0) -> RadialFunction:
    return RadialFunction.from_callable(grid, lambda r: amplitude * np.exp(-width * r * r))


@pytest.fixture
def make_gaussian():
    return gaussian


@pytest.fixture
def power_model():
    return ModelFactory.get_model("power", 1.0)


@pytest.fixture
def asym_model():
    return ModelFactory.get_model("asym", 1.0, s=0.5)


@pytest.fixture
def wide_grid():
    """R* = 10, M = 2000"""
    return RadialGrid.uniform(10.0, 2000)


@pytest.fixture
def gaussian3(wide_grid):
    """3·exp(-r²)"""
    return gaussian(wide_grid, amplitude=3.0)


@pytest.fixture
def fast_config():
    """粗网格、宽松容差，用于快速端到端测试"""
    return SolverConfig.build(
        panels=200,
        alpha_min=1e-6,
        sor_tol=1e-8,
        eps_stop=1e-2,
        max_outer_iterations=2000,
    )


@pytest.fixture(scope="session")
def standard_config():
    return SolverConfig.build()


@pytest.fixture(scope="session")
def power_solution(standard_config):
    """λ = 1 的立方非线性基态（默认参数）"""
    from pohozaev.solver.mmap import solve
    return solve(ModelFactory.get_model("power", 1.0), standard_config)


@pytest.fixture
def make_coarse_tables():
    """写出一个只含 λ = 1 幂律格、粗网格参数的参考表"""
    def write(path, tolerance: float = 0.2):
        tables = {
            "dataset_name": "coarse",
            "tables": {
                "power-heights": {
                    "model": "power",
                    "parameters": {"p": 3.0},
                    "solver": {
                        "panels": 200,
                        "r_star": 1.0,
                        "alpha_min": 1e-6,
                        "sor_tol": 1e-8,
                        "eps_stop": 1e-2,
                        "max_outer_iterations": 2000,
                    },
                    "tolerance": tolerance,
                    "items": [{"id": "lambda=1.0", "lambda": 1.0, "u0": 4.33691, "action": 18.89734}],
                },
            },
        }
        path.write_text(json.dumps(tables), encoding="utf-8")
        return path
    return write
