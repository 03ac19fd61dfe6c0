import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from TrajCert.application.models.domain import SuiteResult
from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import Condition
from TrajCert.application.services.experiment_service import SERIES_METRICS
from TrajCert.infrastructure.data.csv_store import format_number, write_csv
from diagnostics.business_logic.table_specs import (
    METRIC_COLUMNS,
    SWEEP_PREFIX,
    TABLE_SPECS,
    TableId,
    TableSpec,
    appendix_steps,
)

# Configure logging
logger = logging.getLogger(__name__)

SERIES_HEADER = ("condition", "seed", "t", "metric", "value")
SCATTER_HEADER = ("condition", "seed", "final_cert", "early_cert", "final_test_mse")


def _conditions_for(suite: SuiteResult, spec: TableSpec) -> List[Condition]:
    if not spec.conditions:
        sweep = [c for c in suite.conditions if c.label.startswith(SWEEP_PREFIX)]
        if not sweep:
            raise InvalidInputError(f"table {spec.table_id.value} needs step-size sweep conditions ({SWEEP_PREFIX}*)")
        return sorted(sweep, key=lambda c: c.optimizer.eta)
    labels = {c.label for c in suite.conditions}
    for label in spec.conditions:
        if label not in labels:
            raise InvalidInputError(f"table {spec.table_id.value} needs condition {label!r}, which the suite lacks")
    return [suite.condition(label) for label in spec.conditions]


def _row_key(spec: TableSpec, condition: Condition):
    if spec.key_column == "eta":
        return condition.optimizer.eta
    if spec.key_column == "replacement_type":
        return condition.selection.value
    if spec.key_column == "optimizer":
        return condition.optimizer.kind.value
    return condition.labels_mode.value


def table_rows(suite: SuiteResult, spec: TableSpec) -> Tuple[Tuple[str, ...], List[list]]:
    """
    Header and rows of one table.

    Raises:
        InvalidInputError: If the suite lacks a condition the table needs
    """
    conditions = _conditions_for(suite, spec)
    if not spec.per_step:
        header = (spec.key_column,) + spec.value_columns
        rows = []
        for condition in conditions:
            stats = suite.aggregates[condition.label].stats
            rows.append([_row_key(spec, condition)] + [stats[METRIC_COLUMNS[col]].mean for col in spec.value_columns])
        return header, rows

    columns = spec.value_columns or tuple(f"cert_eta_{c.optimizer.eta!r}" for c in conditions)
    T = max(c.T for c in conditions)
    rows = []
    for t in appendix_steps(T):
        row = [t]
        for condition in conditions:
            series = suite.series[condition.label].get(spec.series_metric)
            row.append(float(series[t]) if series is not None and t < series.shape[0] else float("nan"))
        rows.append(row)
    return (spec.key_column,) + tuple(columns), rows


def render_tables(suite: SuiteResult, specs: Iterable[TableSpec], out_dir: Path) -> Dict[TableId, Path]:
    """Write tables/<ID>.csv for every spec."""
    written = {}
    for spec in specs:
        header, rows = table_rows(suite, spec)
        path = Path(out_dir) / "tables" / f"{spec.table_id.value}.csv"
        write_csv(path, header, rows)
        written[spec.table_id] = path
        logger.info(f"Rendered {spec.table_id.value} ({len(rows)} rows) to {path}")
    return written


def specs_for(table_ids: Sequence[TableId]) -> List[TableSpec]:
    return [TABLE_SPECS[table_id] for table_id in table_ids]


def emit_plot_series(suite: SuiteResult, out_dir: Path) -> Tuple[Path, Path]:
    """
    Write series.csv (long format, one row per condition, seed, step and metric) and
    scatter.csv (one row per cell).
    """
    out_dir = Path(out_dir)

    def series_rows():
        for cell in suite.cells:
            for metric, field in SERIES_METRICS.items():
                values = getattr(cell.log, field)
                for t, value in enumerate(values):
                    yield [cell.condition_id, cell.seed, t, metric, value]

    series_path = out_dir / "series.csv"
    scatter_path = out_dir / "scatter.csv"
    write_csv(series_path, SERIES_HEADER, series_rows())
    write_csv(
        scatter_path,
        SCATTER_HEADER,
        (
            [c.condition_id, c.seed, c.summary.final_cert, c.summary.early_cert, c.summary.final_test_mse]
            for c in suite.cells
        ),
    )
    return series_path, scatter_path


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Fixed-width console rendering of a table."""
    cells = [list(header)] + [[format_number(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(value.rjust(width) for value, width in zip(row, widths)) for row in cells)


def format_suite(suite: SuiteResult) -> str:
    """Console summary of a suite: per-condition means and the failure list."""
    lines = []
    for condition in suite.conditions:
        agg = suite.aggregates[condition.label]
        cert = agg.stats["final_cert"]
        test = agg.stats["final_test_mse"]
        lines.append(
            f"{condition.label}: final_cert={format_number(cert.mean)} (std {format_number(cert.std)}) "
            f"final_test_mse={format_number(test.mean)} dataset_cert={format_number(agg.certificate.dataset_cert)} "
            f"seeds={agg.seed_count} diverged={agg.diverged_count}"
        )
    for check in suite.null_checks:
        lines.append(f"null test {check.optimizer.value}: {'PASS' if check.passed else 'FAIL'}")
    lines.extend(f"FAIL {failure}" for failure in suite.failures)
    return "\n".join(lines)
