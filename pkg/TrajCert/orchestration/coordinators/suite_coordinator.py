import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

from TrajCert.application.interfaces.observability_interface import ObservabilityInterface
from TrajCert.application.models.domain import CellResult, NullCheck, SuiteResult
from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import Condition, OptimizerKind, OptimizerSpec
from TrajCert.application.services.experiment_service import (
    ExperimentService,
    check_unique_labels,
    label_conditions,
    neighbor_conditions,
    optimizer_conditions,
    step_size_conditions,
)
from TrajCert.infrastructure.data.artifact_store import write_suite_artifacts
from TrajCert.orchestration.coordinators.service_coordinator import ServiceCoordinator

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuiteRequest:
    conditions: Sequence[Condition]
    out_dir: Optional[Path] = None
    null_checks: bool = True
    name: str = "tcert-suite"


class SuiteCoordinator(ServiceCoordinator[SuiteRequest, SuiteResult]):
    """
    Runs every (condition, seed) cell of a suite on a thread pool and assembles the result.

    Cells are independent; rows are ordered by condition then seed regardless of the
    order in which workers finish.
    """

    def __init__(self, workers: int = 1, observability: Optional[ObservabilityInterface] = None):
        super().__init__()
        if workers < 1:
            raise InvalidInputError(f"workers must be at least 1, got {workers}")
        self.workers = workers
        self.observability = observability
        self.register_service("experiments", ExperimentService())
        self.status = {"state": "idle"}

    def _null_targets(self, conditions: Sequence[Condition]) -> List[Condition]:
        """First condition per optimizer kind present."""
        seen: Dict[OptimizerKind, Condition] = {}
        for condition in conditions:
            seen.setdefault(condition.optimizer.kind, condition)
        return list(seen.values())

    def _trace_cell(self, trace, cell: CellResult) -> None:
        if self.observability is None:
            return
        summary = cell.summary
        self.observability.log_event(
            "cell",
            {
                "cell": f"{cell.condition_id}/{cell.seed}",
                "final_cert": summary.final_cert,
                "final_test_mse": summary.final_test_mse,
                "diverged": summary.diverged,
                "bound_ok": all(check.report.ok for check in cell.checks),
            },
            {"trace": trace},
        )

    async def coordinate(self, input_data: SuiteRequest) -> SuiteResult:
        conditions = list(input_data.conditions)
        if not conditions:
            raise InvalidInputError("a suite needs at least one condition")
        check_unique_labels(conditions)
        service: ExperimentService = self.get_service("experiments")
        cells_total = sum(len(c.seeds) for c in conditions)
        self.status = {"state": "processing", "cells": cells_total, "done": 0}

        trace = None
        if self.observability is not None:
            trace = self.observability.start_trace(
                input_data.name, {"metadata": {"conditions": [c.label for c in conditions], "workers": self.workers}}
            )
        logger.info(f"Running {cells_total} cells of {len(conditions)} conditions on {self.workers} workers")

        loop = asyncio.get_running_loop()
        try:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = [
                    loop.run_in_executor(pool, service.run_cell, condition, seed)
                    for condition in conditions
                    for seed in condition.seeds
                ]
                cells: List[CellResult] = []
                for future in asyncio.as_completed(futures):
                    cell = await future
                    cells.append(cell)
                    self.status["done"] += 1
                    self._trace_cell(trace, cell)

                null_checks: List[NullCheck] = []
                if input_data.null_checks:
                    null_futures = [
                        loop.run_in_executor(pool, service.run_null_check, condition, condition.seeds[0])
                        for condition in self._null_targets(conditions)
                    ]
                    null_checks = list(await asyncio.gather(*null_futures))

            suite = service.aggregate(conditions, cells, null_checks)
            if input_data.out_dir is not None:
                write_suite_artifacts(input_data.out_dir, suite)
        except Exception as e:
            self.status = {"state": "failed", "error": str(e)}
            if self.observability is not None:
                self.observability.end_trace(trace, "error", {"error": str(e)})
            raise

        self.status = {"state": "completed", "failures": len(suite.failures)}
        for failure in suite.failures:
            logger.error(failure)
        if self.observability is not None:
            self.observability.end_trace(trace, "success" if suite.ok else "failed", {"failures": len(suite.failures)})
        return suite


def run_suite(
    conditions: Sequence[Condition],
    workers: int = 1,
    out_dir: Optional[Path] = None,
    observability: Optional[ObservabilityInterface] = None,
    null_checks: bool = True,
) -> SuiteResult:
    """Synchronous entry point: run, aggregate and optionally write a suite."""
    coordinator = SuiteCoordinator(workers, observability)
    return asyncio.run(coordinator.coordinate(SuiteRequest(conditions, out_dir, null_checks)))


def sweep_step_size(etas: Sequence[float], base: Condition, **kwargs) -> SuiteResult:
    return run_suite(step_size_conditions(etas, base), **kwargs)


def compare_optimizers(base: Condition, optimizers: Mapping[OptimizerKind, OptimizerSpec], **kwargs) -> SuiteResult:
    return run_suite(optimizer_conditions(base, optimizers), **kwargs)


def ablate_neighbor(base: Condition, **kwargs) -> SuiteResult:
    return run_suite(neighbor_conditions(base), **kwargs)


def ablate_labels(base: Condition, **kwargs) -> SuiteResult:
    return run_suite(label_conditions(base), **kwargs)
