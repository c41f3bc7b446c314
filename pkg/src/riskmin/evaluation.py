"""Fault-preservation evaluation over per-version minimization outcomes.

A version label names the tests that reveal the version's fault and the
evaluation instant. Accuracy is the fraction of those tests retained;
the fault detection rate over many versions is the fraction of versions
keeping at least one of them. ``run_sweep`` grids these measurements over
metric, horizon, operator, and budget, caching per-(version, metric,
horizon) risk tables so the four operators share one risk computation.
"""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .change_history import ClassHistory
from .dependency_graph import CallGraph, MethodRef, build_dependency_map
from .errors import LabelError
from .minimizer import Budget, MinimizationResult, config_fingerprint, select
from .risk_aggregation import OPERATORS, TestScore, score_test
from .temporal_risk import METRICS, RiskConfig, risk_table


@dataclass(frozen=True)
class VersionLabel:
    version_id: str
    as_of: int
    fault_revealing_tests: frozenset[str]


@dataclass(frozen=True)
class VersionOutcome:
    version_id: str
    accuracy: float
    detected: bool
    wall_time: float
    config_fingerprint: str


def accuracy(selected: set[str], label: VersionLabel) -> float:
    """Fraction of the version's fault-revealing tests that were retained."""
    if not label.fault_revealing_tests:
        raise LabelError(f"version {label.version_id!r} has no fault-revealing tests")
    fault_tests = label.fault_revealing_tests
    return len(selected & fault_tests) / len(fault_tests)


def fdr(outcomes: Sequence[VersionOutcome]) -> float:
    """Fraction of versions whose minimized suite kept at least one fault test."""
    if not outcomes:
        raise ValueError("fdr() requires at least one outcome")
    return sum(1 for o in outcomes if o.detected) / len(outcomes)


def score_tests(
    histories: Mapping[str, ClassHistory],
    dep_map: Mapping[str, list[str]],
    cfg: RiskConfig,
    operator: str,
) -> dict[str, TestScore]:
    """Risk-score every test in the dependency map under one configuration."""
    table = risk_table(histories, cfg)
    return {
        test_id: score_test(test_id, deps, table, operator)
        for test_id, deps in dep_map.items()
    }


def minimize_suite(
    histories: Mapping[str, ClassHistory],
    graph: CallGraph,
    entries: Iterable[MethodRef],
    *,
    metric: str,
    half_life_days: float | None,
    operator: str,
    budget: Budget,
    as_of: int,
    test_class_filter: set[str] | None = None,
    dep_map: Mapping[str, list[str]] | None = None,
) -> MinimizationResult:
    """End-to-end pipeline: risks, dependencies, scores, selection."""
    cfg = RiskConfig(metric=metric, half_life_days=half_life_days, reference_time=as_of)
    if dep_map is None:
        dep_map = build_dependency_map(graph, entries, test_class_filter)
    scores = score_tests(histories, dep_map, cfg, operator)
    fingerprint = config_fingerprint(metric, half_life_days, operator, budget.fraction, as_of)
    return select(scores, budget, fingerprint)


def run_version(
    histories: Mapping[str, ClassHistory],
    graph: CallGraph,
    entries: Iterable[MethodRef],
    label: VersionLabel,
    *,
    metric: str,
    half_life_days: float | None,
    operator: str,
    budget: Budget,
    test_class_filter: set[str] | None = None,
    dep_map: Mapping[str, list[str]] | None = None,
    extra_seconds: float = 0.0,
) -> VersionOutcome:
    """Minimize one version's suite and measure fault preservation.

    ``wall_time`` covers the stages executed here (risk scoring, dependency
    analysis, aggregation, selection); ``extra_seconds`` lets callers fold
    in upstream ingestion time they measured themselves.
    """
    start = time.perf_counter()
    result = minimize_suite(
        histories,
        graph,
        entries,
        metric=metric,
        half_life_days=half_life_days,
        operator=operator,
        budget=budget,
        as_of=label.as_of,
        test_class_filter=test_class_filter,
        dep_map=dep_map,
    )
    acc = accuracy(set(result.selected), label)
    elapsed = time.perf_counter() - start
    return VersionOutcome(
        version_id=label.version_id,
        accuracy=acc,
        detected=acc > 0,
        wall_time=elapsed + extra_seconds,
        config_fingerprint=result.config_fingerprint,
    )


@dataclass
class VersionInputs:
    """Everything needed to evaluate one labeled version."""

    histories: Mapping[str, ClassHistory]
    graph: CallGraph
    entries: frozenset[MethodRef]
    label: VersionLabel
    test_class_filter: set[str] | None = None
    ingest_seconds: float = 0.0


CANONICAL_HORIZONS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0)
CANONICAL_BUDGETS = (0.25, 0.50, 0.75)


@dataclass(frozen=True)
class SweepGrid:
    """Configuration grid: metrics x horizons x operators, per budget.

    ``None`` in ``horizons`` stands for static mode.
    """

    metrics: tuple[str, ...] = METRICS
    horizons: tuple[float | None, ...] = CANONICAL_HORIZONS
    operators: tuple[str, ...] = OPERATORS
    budgets: tuple[float, ...] = CANONICAL_BUDGETS

    @property
    def cells_per_budget(self) -> int:
        return len(self.metrics) * len(self.horizons) * len(self.operators)


@dataclass(frozen=True)
class SweepRow:
    metric: str
    horizon_days: float | None
    operator: str
    budget: float
    mean_accuracy: float
    fdr: float
    min_acc: float
    q1_acc: float
    median_acc: float
    q3_acc: float
    max_acc: float
    mean_time_s: float


def describe(values: Sequence[float]) -> tuple[float, float, float, float, float, float]:
    """(min, Q1, mean, median, Q3, max); quartiles use inclusive interpolation."""
    if not values:
        raise ValueError("describe() requires at least one value")
    ordered = sorted(values)
    med = statistics.median(ordered)
    if len(ordered) == 1:
        q1 = q3 = med
    else:
        q1, _, q3 = statistics.quantiles(ordered, n=4, method="inclusive")
    return (ordered[0], q1, statistics.fmean(ordered), med, q3, ordered[-1])


def _sweep_one_version(
    inputs: VersionInputs, grid: SweepGrid
) -> dict[tuple[str, float | None, str, float], tuple[float, float]]:
    """Accuracy and attributed wall time for every grid cell of one version.

    The dependency map and each (metric, horizon) risk table are computed
    once; their measured cost is charged to every cell that reuses them, so
    a cell's time reads as if that configuration had run standalone.
    """
    cells: dict[tuple[str, float | None, str, float], tuple[float, float]] = {}
    t0 = time.perf_counter()
    dep_map = build_dependency_map(inputs.graph, inputs.entries, inputs.test_class_filter)
    dep_seconds = time.perf_counter() - t0
    base_seconds = dep_seconds + inputs.ingest_seconds
    for metric in grid.metrics:
        for horizon in grid.horizons:
            cfg = RiskConfig(
                metric=metric, half_life_days=horizon, reference_time=inputs.label.as_of
            )
            t0 = time.perf_counter()
            table = risk_table(inputs.histories, cfg)
            risk_seconds = time.perf_counter() - t0
            for operator in grid.operators:
                t0 = time.perf_counter()
                scores = {
                    test_id: score_test(test_id, deps, table, operator)
                    for test_id, deps in dep_map.items()
                }
                score_seconds = time.perf_counter() - t0
                for fraction in grid.budgets:
                    t0 = time.perf_counter()
                    result = select(
                        scores,
                        Budget(fraction),
                        config_fingerprint(metric, horizon, operator, fraction, inputs.label.as_of),
                    )
                    acc = accuracy(set(result.selected), inputs.label)
                    select_seconds = time.perf_counter() - t0
                    cells[(metric, horizon, operator, fraction)] = (
                        acc,
                        base_seconds + risk_seconds + score_seconds + select_seconds,
                    )
    return cells


def run_sweep(dataset: Sequence[VersionInputs], grid: SweepGrid, jobs: int = 1) -> list[SweepRow]:
    """Evaluate every grid cell over every version; one row per cell per budget.

    Rows come out in grid order (metric, horizon, operator, budget), each
    aggregating accuracy, detection, and time across the dataset.
    """
    if not dataset:
        return []
    if jobs > 1 and len(dataset) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_version = list(pool.map(lambda vi: _sweep_one_version(vi, grid), dataset))
    else:
        per_version = [_sweep_one_version(vi, grid) for vi in dataset]

    rows: list[SweepRow] = []
    for metric in grid.metrics:
        for horizon in grid.horizons:
            for operator in grid.operators:
                for fraction in grid.budgets:
                    key = (metric, horizon, operator, fraction)
                    accs = [cells[key][0] for cells in per_version]
                    times = [cells[key][1] for cells in per_version]
                    lo, q1, mean, med, q3, hi = describe(accs)
                    rows.append(
                        SweepRow(
                            metric=metric,
                            horizon_days=horizon,
                            operator=operator,
                            budget=fraction,
                            mean_accuracy=mean,
                            fdr=sum(1 for a in accs if a > 0) / len(accs),
                            min_acc=lo,
                            q1_acc=q1,
                            median_acc=med,
                            q3_acc=q3,
                            max_acc=hi,
                            mean_time_s=statistics.fmean(times),
                        )
                    )
    return rows
