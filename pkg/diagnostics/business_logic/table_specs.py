from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict


class TableId(str, Enum):
    T1: str = "T1"
    T2: str = "T2"
    T3: str = "T3"
    T4: str = "T4"
    A5: str = "A5"
    A6: str = "A6"
    A7: str = "A7"
    A8: str = "A8"


SWEEP_PREFIX = "sweep_eta_"

# table column -> RunSummary metric averaged over seeds
METRIC_COLUMNS = {
    "final_certificate": "final_cert",
    "final_test_mse": "final_test_mse",
    "gen_gap": "gen_gap",
    "probe_discrepancy": "final_probe_disc",
}


class TableSpec(BaseModel):
    """
    Schema of one rendered table.

    Per-condition tables have one row per condition keyed by key_column; per-step
    tables (series_metric set) have one row per appendix step and one column per
    condition. An empty conditions tuple selects the step-size sweep.
    """

    model_config = ConfigDict(frozen=True)

    table_id: TableId
    description: str
    key_column: str
    value_columns: Tuple[str, ...] = ()
    conditions: Tuple[str, ...] = ()
    series_metric: Optional[str] = None

    @property
    def per_step(self) -> bool:
        return self.series_metric is not None


TABLE_SPECS: Dict[TableId, TableSpec] = {
    TableId.T1: TableSpec(
        table_id=TableId.T1,
        description="Terminal certificate and performance across GD step sizes (seed mean)",
        key_column="eta",
        value_columns=("final_certificate", "final_test_mse", "gen_gap"),
    ),
    TableId.T2: TableSpec(
        table_id=TableId.T2,
        description="Neighbor-selection ablation, GD (seed mean)",
        key_column="replacement_type",
        value_columns=("final_certificate", "probe_discrepancy"),
        conditions=("neighbor_random_index", "neighbor_high_leverage"),
    ),
    TableId.T3: TableSpec(
        table_id=TableId.T3,
        description="Optimizer comparison (seed mean)",
        key_column="optimizer",
        value_columns=("final_certificate", "final_test_mse", "gen_gap"),
        conditions=("opt_sgd", "opt_gd", "opt_adam"),
    ),
    TableId.T4: TableSpec(
        table_id=TableId.T4,
        description="Clean versus permuted labels, GD (seed mean)",
        key_column="labels",
        value_columns=("final_certificate", "final_test_mse", "gen_gap"),
        conditions=("labels_clean", "labels_permuted"),
    ),
    TableId.A5: TableSpec(
        table_id=TableId.A5,
        description="Certificate prefix during training across step sizes (seed mean)",
        key_column="t",
        series_metric="cert_prefix",
    ),
    TableId.A6: TableSpec(
        table_id=TableId.A6,
        description="Probe discrepancy during training by neighbor selection (seed mean)",
        key_column="t",
        value_columns=("random_index", "high_leverage"),
        conditions=("neighbor_random_index", "neighbor_high_leverage"),
        series_metric="probe_disc",
    ),
    TableId.A7: TableSpec(
        table_id=TableId.A7,
        description="Certificate prefix during training by optimizer (seed mean)",
        key_column="t",
        value_columns=("sgd", "gd", "adam"),
        conditions=("opt_sgd", "opt_gd", "opt_adam"),
        series_metric="cert_prefix",
    ),
    TableId.A8: TableSpec(
        table_id=TableId.A8,
        description="Certificate prefix during training, clean versus permuted labels (seed mean)",
        key_column="t",
        value_columns=("clean", "permuted"),
        conditions=("labels_clean", "labels_permuted"),
        series_metric="cert_prefix",
    ),
}

TABLES_BY_WORKFLOW: Dict[str, List[TableId]] = {
    "sweep": [TableId.T1, TableId.A5],
    "ablate-neighbor": [TableId.T2, TableId.A6],
    "compare-optimizers": [TableId.T3, TableId.A7],
    "ablate-labels": [TableId.T4, TableId.A8],
    "run": list(TableId),
}


def appendix_steps(T: int) -> List[int]:
    """Rows of the per-step tables: T/4, T/2, 3T/4 and T (duplicates and 0 dropped)."""
    return sorted(({k * T // 4 for k in (1, 2, 3)} - {0}) | {T})
