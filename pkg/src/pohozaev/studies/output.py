"""CSV / JSON 输出与运行清单。

表格类数值固定 5 位小数，轨迹文件保留 17 位有效数字。
"""
import csv
import json
import os
import time
from dataclasses import dataclass, asdict, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import psutil

from pohozaev import __version__
from pohozaev.solver.mmap import SolveResult, TraceRecord

MANIFEST_NAME = "manifest.json"


def fixed(value: Any) -> str:
    """5 位小数；None 记为 --"""
    if value is None:
        return "--"
    if isinstance(value, (int, str)) and not isinstance(value, bool):
        return str(value)
    return f"{float(value):.5f}"


def full(value: float) -> str:
    return format(float(value), '.17g')


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], formatter=fixed) -> Path:
    """写出带表头的逗号分隔文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([formatter(v) for v in row])
    return path


def write_profile(path: Path, result: SolveResult) -> Path:
    r = result.solution.grid.nodes
    return write_rows(path, ("r", "u"), zip(r.tolist(), result.solution.values.tolist()))


def write_trace(path: Path, trace: List[TraceRecord]) -> Path:
    rows = (
        (rec.iteration, full(rec.action), full(rec.t_star), full(rec.alpha), full(rec.grad_norm), int(rec.restart))
        for rec in trace
    )
    return write_rows(path, ("iter", "I", "t_star", "alpha", "v_norm", "restart"), rows, formatter=str)


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
    return path


def write_result(path: Path, result: SolveResult) -> Path:
    return write_json(path, result.summary())


def write_solve_outputs(out_dir: Path, result: SolveResult, prefix: str = "") -> List[str]:
    """profile.csv、trace.csv、result.json"""
    out_dir = Path(out_dir)
    return [
        str(write_profile(out_dir / f"{prefix}profile.csv", result)),
        str(write_trace(out_dir / f"{prefix}trace.csv", result.trace)),
        str(write_result(out_dir / f"{prefix}result.json", result)),
    ]


@dataclass
class RunManifest:
    """一次命令运行的清单，可用于重放"""
    command: str
    arguments: Dict[str, Any]
    config: Dict[str, Any] = field(default_factory=dict)
    model: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    duration_seconds: float = 0.0
    exit_status: int = 0
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    rss_mb: float = 0.0
    version: str = __version__
    _start: float = field(default_factory=time.time, repr=False)

    def finish(self, exit_status: int) -> None:
        self.exit_status = exit_status
        self.duration_seconds = time.time() - self._start
        self.rss_mb = psutil.Process(os.getpid()).memory_info().rss / 1024 / 1024

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop('_start')
        return data

    def save(self, out_dir: Path) -> Path:
        return write_json(Path(out_dir) / MANIFEST_NAME, self.to_dict())

    @classmethod
    def load(cls, path: Path) -> 'RunManifest':
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__ and k != '_start'}
        return cls(**known)


def find_manifest(path: Optional[str]) -> Path:
    """接受清单文件或其所在目录"""
    candidate = Path(path)
    return candidate / MANIFEST_NAME if candidate.is_dir() else candidate
