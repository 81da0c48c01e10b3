import json
from typing import Any, Dict, List, Optional

from pohozaev.settings import settings
from pohozaev.utils.exceptions import InvalidParameterError

TABLES = ("power-heights", "asym-grid", "asym-profile")


class ReferenceDataset:
    """已发表的基态数值表"""

    def __init__(self, dataset_path: Optional[str] = None):
        self.dataset_path = dataset_path or settings.reference_tables_path
        self.dataset_name = ""
        self.tables = self.load_dataset()

    def load_dataset(self) -> Dict[str, Dict[str, Any]]:
        """加载参考数据集"""
        with open(self.dataset_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        self.dataset_name = data.get('dataset_name', 'unknown')
        return data.get('tables', {})

    def get_table(self, name: str) -> Dict[str, Any]:
        if name not in self.tables:
            raise InvalidParameterError(
                f"Unknown reference table: {name}",
                details={"available": sorted(self.tables)},
            )
        return self.tables[name]

    def get_items(self, name: str) -> List[Dict[str, Any]]:
        return self.get_table(name).get('items', [])

    def get_tolerance(self, name: str) -> float:
        return float(self.get_table(name)['tolerance'])

    def get_solver_overrides(self, name: str) -> Dict[str, Any]:
        return dict(self.get_table(name).get('solver', {}))

    def asym_cell(self, s: float, lam: float) -> Optional[float]:
        """渐近线性族的 u(0)；不可行格为 None，表中没有的格抛出 InvalidParameterError"""
        for item in self.get_items('asym-grid'):
            if abs(item['s'] - s) < 1e-12 and abs(item['lambda'] - lam) < 1e-12:
                return item['u0']
        raise InvalidParameterError(f"No reference cell for s={s}, lambda={lam}")

    def __len__(self) -> int:
        return sum(len(table.get('items', [])) for table in self.tables.values())
