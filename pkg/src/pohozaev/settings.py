from pathlib import Path
from typing import Optional, Dict, Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pohozaev.utils.exceptions import InvalidParameterError

PACKAGE_DIR = Path(__file__).parent


class SolverConfig(BaseModel):
    """MMAP 数值参数（不可变）"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    panels: int = Field(1000, description="网格区间数 M，节点数为 M+1")
    r_star: float = Field(1.0, description="初始区间长度 R*")
    alpha0: float = Field(0.1, description="线搜索初始步长")
    alpha_min: float = Field(1e-10, description="线搜索最小步长")
    line_search_cap: int = Field(1000, description="线搜索步数上限 K")
    eps_stop: float = Field(1e-3, description="‖v‖ 停止阈值")
    sor_omega: float = Field(1.9, description="SOR 松弛因子")
    sor_tol: float = Field(1e-10, description="SOR 相对残差容差")
    sor_max_iterations: int = Field(1_000_000, description="SOR 最大扫描次数")
    reproject_stride: int = Field(1, description="线搜索中重新投影的间隔 N_r")
    max_outer_iterations: int = Field(10_000, description="外层迭代上限")
    t_min: float = Field(1e-6, description="投影参数下限，低于此值触发重启")
    positivity_tol: float = Field(1e-8, description="正性检查容差")
    max_restarts: int = Field(50, description="线搜索失败后重启的次数上限")
    stall_patience: int = Field(3, description="连续零步长次数，达到即视为停滞")
    warm_start: bool = Field(True, description="SOR 以上一步方向作为初值")

    @field_validator(
        'panels', 'r_star', 'alpha0', 'alpha_min', 'line_search_cap', 'eps_stop',
        'sor_tol', 'sor_max_iterations', 'reproject_stride', 'max_outer_iterations',
        't_min', 'positivity_tol', 'stall_patience',
    )
    @classmethod
    def validate_positive(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive, got {v}")
        return v

    @field_validator('panels')
    @classmethod
    def validate_panels(cls, v: int) -> int:
        if v < 4:
            raise ValueError("panels must be at least 4")
        return v

    @field_validator('sor_omega')
    @classmethod
    def validate_omega(cls, v: float) -> float:
        if not 0.0 < v < 2.0:
            raise ValueError("sor_omega must lie in (0, 2)")
        return v

    @field_validator('max_restarts')
    @classmethod
    def validate_restarts(cls, v: int) -> int:
        if v < 0:
            raise ValueError("max_restarts must be nonnegative")
        return v

    @model_validator(mode='after')
    def validate_step_bounds(self) -> 'SolverConfig':
        if self.alpha_min > self.alpha0:
            raise ValueError("alpha_min must not exceed alpha0")
        return self

    @classmethod
    def build(cls, **kwargs) -> 'SolverConfig':
        """构造配置，校验失败统一转为 InvalidParameterError"""
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise InvalidParameterError(
                "Invalid solver configuration",
                details={"errors": [err["msg"] for err in e.errors()]},
            ) from e

    def with_overrides(self, **kwargs) -> 'SolverConfig':
        """返回覆盖部分字段后的新配置"""
        data = self.model_dump()
        data.update({k: v for k, v in kwargs.items() if v is not None})
        return SolverConfig.build(**data)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="POHOZAEV_",
        env_file=(
            Path(__file__).parent.parent.parent / ".env.local",
            Path(__file__).parent.parent.parent / ".env",
        ),
        case_sensitive=False,
        extra="ignore",
    )

    # 基础配置
    project_name: str = "Pohozaev MMAP"

    # 日志配置
    log_level: str = "INFO"
    log_file: Optional[str] = "logs/pohozaev.log"

    # 输出配置
    output_dir: str = "data/runs/"
    reference_tables_path: str = str(PACKAGE_DIR / "data" / "reference_tables.json")

    # 并行扫描
    sweep_workers: int = 4

    # 初始猜测 A·exp(-σ r²)
    guess_amplitude: float = 100.0
    guess_width: float = 10.0

    # 求解器默认参数
    panels: int = 1000
    r_star: float = 1.0
    alpha0: float = 0.1
    alpha_min: float = 1e-10
    line_search_cap: int = 1000
    eps_stop: float = 1e-3
    sor_omega: float = 1.9
    sor_tol: float = 1e-10
    sor_max_iterations: int = 1_000_000
    reproject_stride: int = 1
    max_outer_iterations: int = 10_000
    t_min: float = 1e-6
    positivity_tol: float = 1e-8
    max_restarts: int = 50
    stall_patience: int = 3

    def get_solver_config(self, **overrides: Any) -> SolverConfig:
        """获取求解器配置，显式参数优先于环境变量与默认值"""
        base: Dict[str, Any] = {
            name: getattr(self, name)
            for name in SolverConfig.model_fields
            if hasattr(self, name)
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        return SolverConfig.build(**base)


settings = Settings()
