from abc import ABC, abstractmethod
from typing import Dict, Any, Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from pohozaev.utils.exceptions import InfeasibleFamilyError, InvalidParameterError

Scalar = Union[float, NDArray[np.float64]]

PROBE_POINTS = (0.1, 0.5, 1.0, 2.0, 5.0)
PROBE_STEP = 1e-5
PROBE_TOLERANCE = 1e-6
MONOTONICITY_TOLERANCE = 1e-12


class NonlinearityModel(ABC):
    """问题实例：f、F = ∫f、λ 及族参数

    f 在负半轴按奇延拓、F 按偶延拓，只需在 u ≥ 0 上给出公式。
    """

    name: str = ""

    def __init__(self, lam: float, **parameters: float):
        if not np.isfinite(lam) or lam <= 0:
            raise InvalidParameterError(f"lambda must be positive, got {lam}")
        self.lam = float(lam)
        self._parameters = {k: float(v) for k, v in parameters.items()}

    @property
    def parameters(self) -> Dict[str, float]:
        return dict(self._parameters)

    @abstractmethod
    def _f_positive(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        """u ≥ 0 上的 f"""

    @abstractmethod
    def _F_positive(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        """u ≥ 0 上的 F，F(0) = 0"""

    def f(self, u: Scalar) -> Scalar:
        arr = np.asarray(u, dtype=np.float64)
        out = np.sign(arr) * self._f_positive(np.abs(arr))
        return float(out) if out.ndim == 0 else out

    def F(self, u: Scalar) -> Scalar:
        arr = np.asarray(u, dtype=np.float64)
        out = self._F_positive(np.abs(arr))
        return float(out) if out.ndim == 0 else out

    def G(self, u: Scalar) -> Scalar:
        """G(u) = -λu²/2 + F(u)"""
        arr = np.asarray(u, dtype=np.float64)
        out = -0.5 * self.lam * arr * arr + self._F_positive(np.abs(arr))
        return float(out) if out.ndim == 0 else out

    def check_primitive(self) -> None:
        """校验 F(0)=0 与 F' ≈ f"""
        if self.F(0.0) != 0.0:
            raise InvalidParameterError(f"{self.name}: F(0) must vanish")
        for u in PROBE_POINTS:
            slope = (self.F(u + PROBE_STEP) - self.F(u - PROBE_STEP)) / (2 * PROBE_STEP)
            fu = self.f(u)
            if abs(slope - fu) > PROBE_TOLERANCE * (1 + abs(fu)):
                raise InvalidParameterError(
                    f"{self.name}: F' does not match f at u={u}",
                    details={"slope": slope, "f": fu},
                )

    def describe(self) -> Dict[str, Any]:
        return {"model": self.name, "lambda": self.lam, **self._parameters}

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self._parameters.items())
        return f"{type(self).__name__}(lambda={self.lam:g}{', ' if params else ''}{params})"


class PowerModel(NonlinearityModel):
    """f(u) = |u|^{p-1}u"""

    name = "power"

    def __init__(self, lam: float, p: float = 3.0):
        if not 1.0 < p < 5.0:
            raise InvalidParameterError(f"power exponent must lie in (1, 5), got {p}")
        super().__init__(lam, p=p)
        self.p = float(p)
        self.check_primitive()

    def _f_positive(self, u):
        return u ** self.p

    def _F_positive(self, u):
        return u ** (self.p + 1.0) / (self.p + 1.0)


class AsymLinearModel(NonlinearityModel):
    """f(u) = u³/(1+su²)，f(u)/u → 1/s"""

    name = "asym"

    def __init__(self, lam: float, s: float):
        if not np.isfinite(s) or s <= 0:
            raise InvalidParameterError(f"s must be positive, got {s}")
        if lam * s >= 1.0:
            raise InfeasibleFamilyError(
                f"λs ≥ 1 (λ={lam:g}, s={s:g}): no positive ground state",
                details={"lambda": lam, "s": s},
            )
        super().__init__(lam, s=s)
        self.s = float(s)
        self.check_primitive()

    def _f_positive(self, u):
        return u ** 3 / (1.0 + self.s * u * u)

    def _F_positive(self, u):
        x = self.s * u * u
        # x - log1p(x) 在 x 很小时相消
        small = x < 1e-4
        series = x * x * (0.5 - x / 3.0 + x * x / 4.0)
        exact = x - np.log1p(np.where(small, 0.0, x))
        return np.where(small, series, exact) / (2.0 * self.s * self.s)


class QuinticModel(NonlinearityModel):
    """F(u) = Bu³ - Cu⁴ + Du⁵"""

    name = "quintic"

    def __init__(self, lam: float, B: float, C: float, D: float):
        for label, value in (("B", B), ("C", C), ("D", D)):
            if not np.isfinite(value) or value <= 0:
                raise InvalidParameterError(f"{label} must be positive, got {value}")
        super().__init__(lam, B=B, C=C, D=D)
        self.B, self.C, self.D = float(B), float(C), float(D)
        self.check_primitive()

    def _f_positive(self, u):
        return u * u * (3.0 * self.B - 4.0 * self.C * u + 5.0 * self.D * u * u)

    def _F_positive(self, u):
        return u ** 3 * (self.B - self.C * u + self.D * u * u)


class NonMonotoneModel(NonlinearityModel):
    """f(u) = (u⁷ - 5u⁵/2 + 2u³)/(1+su⁶)，f(u)/u 不单调

    F 没有闭式，逐段自适应积分后用 Hermite 三次样条缓存（节点导数即 f）。
    """

    name = "nonmono"

    TABLE_LINEAR_END = 4.0
    TABLE_END = 1.0e3
    QUAD_TOLERANCE = 1e-12

    def __init__(self, lam: float, s: float):
        if not np.isfinite(s) or s <= 0:
            raise InvalidParameterError(f"s must be positive, got {s}")
        super().__init__(lam, s=s)
        self.s = float(s)
        self._build_table()
        self.check_primitive()

    def _f_positive(self, u):
        u2 = u * u
        return u * u2 * (u2 * u2 - 2.5 * u2 + 2.0) / (1.0 + self.s * u2 * u2 * u2)

    def _scalar_f(self, x: float) -> float:
        return float(self._f_positive(np.float64(x)))

    def _build_table(self) -> None:
        nodes = np.concatenate([
            np.linspace(0.0, self.TABLE_LINEAR_END, 4001),
            np.geomspace(self.TABLE_LINEAR_END, self.TABLE_END, 3000)[1:],
        ])
        pieces = np.empty(nodes.size - 1)
        for i, (a, b) in enumerate(zip(nodes[:-1], nodes[1:])):
            pieces[i], _ = integrate.quad(
                self._scalar_f, a, b,
                epsabs=self.QUAD_TOLERANCE, epsrel=self.QUAD_TOLERANCE,
            )
        primitive = np.concatenate([[0.0], np.cumsum(pieces)])
        self._table = CubicHermiteSpline(nodes, primitive, self._f_positive(nodes))
        self._table_end_value = float(primitive[-1])

    def _F_positive(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.asarray(self._table(np.minimum(u, self.TABLE_END)), dtype=np.float64)
        beyond = u > self.TABLE_END
        if np.any(beyond):
            out = np.array(out, copy=True)
            flat = out.reshape(-1)
            for idx in np.flatnonzero(beyond.reshape(-1)):
                tail, _ = integrate.quad(
                    self._scalar_f, self.TABLE_END, float(u.reshape(-1)[idx]),
                    epsabs=self.QUAD_TOLERANCE, epsrel=self.QUAD_TOLERANCE,
                )
                flat[idx] = self._table_end_value + tail
        return out


def make_power(lam: float, p: float = 3.0) -> PowerModel:
    return PowerModel(lam, p=p)


def make_asym_linear(lam: float, s: float) -> AsymLinearModel:
    return AsymLinearModel(lam, s=s)


def make_quintic(lam: float, B: float, C: float, D: float) -> QuinticModel:
    return QuinticModel(lam, B=B, C=C, D=D)


def make_nonmonotone(lam: float, s: float) -> NonMonotoneModel:
    return NonMonotoneModel(lam, s=s)


def G_eval(model: NonlinearityModel, u: Scalar) -> Scalar:
    return model.G(u)


def monotonicity_probe(model: NonlinearityModel, u_grid) -> bool:
    """u ↦ f(u)/u 在探测网格上是否非减"""
    u = np.asarray(u_grid, dtype=np.float64)
    if u.ndim != 1 or u.size < 2 or np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise InvalidParameterError("Probe grid must be positive and strictly increasing")
    ratio = model.f(u) / u
    return bool(np.all(np.diff(ratio) >= -MONOTONICITY_TOLERANCE))


class ModelFactory:
    """非线性项工厂"""

    MODELS = ("power", "asym", "quintic", "nonmono")

    @staticmethod
    def get_model(model_name: str, lam: float, **params: Optional[float]) -> NonlinearityModel:
        """按名称构造模型，未给出的族参数取默认值"""
        params = {k: v for k, v in params.items() if v is not None}
        if model_name == "power":
            return make_power(lam, p=params.get("p", 3.0))
        elif model_name == "asym":
            return make_asym_linear(lam, s=params.get("s", 0.5))
        elif model_name == "quintic":
            if not {"B", "C", "D"} <= params.keys():
                from pohozaev.models.profiles import quintic_calibration
                calibration = quintic_calibration(lam)
                params = {**calibration.coefficients(), **params}
            return make_quintic(lam, B=params["B"], C=params["C"], D=params["D"])
        elif model_name == "nonmono":
            return make_nonmonotone(lam, s=params.get("s", 1.0))
        else:
            raise InvalidParameterError(f"Unknown model: {model_name}")
