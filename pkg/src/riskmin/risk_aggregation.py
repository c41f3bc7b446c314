"""Collapse the class risks a test reaches into a single test score."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping

from .temporal_risk import ClassRisk

OP_AVG = "avg"
OP_GMEAN = "gmean"
OP_HMEAN = "hmean"
OP_MEDIAN = "median"
OPERATORS = (OP_AVG, OP_GMEAN, OP_HMEAN, OP_MEDIAN)


def aggregate(values: Iterable[float], op: str) -> float:
    """Apply one of the four supported operators to positive values.

    Values are sorted before reduction so the result is bit-identical under
    permutation. The geometric mean is computed in log space to avoid
    underflow when many tiny decayed risks multiply.
    """
    ordered = sorted(values)
    if not ordered:
        raise ValueError("aggregate() requires a non-empty multiset")
    if ordered[0] <= 0:
        raise ValueError("aggregate() requires strictly positive values")
    if op == OP_AVG:
        return statistics.fmean(ordered)
    if op == OP_GMEAN:
        return math.exp(statistics.fmean([math.log(v) for v in ordered]))
    if op == OP_HMEAN:
        return len(ordered) / sum(1.0 / v for v in ordered)
    if op == OP_MEDIAN:
        return statistics.median(ordered)
    raise ValueError(f"unknown operator {op!r}; expected one of {OPERATORS}")


@dataclass(frozen=True)
class TestScore:
    __test__ = False  # not a pytest class, despite the name

    test_id: str
    score: float
    dep_count: int
    nonzero_dep_count: int


def score_test(
    test_id: str,
    deps: Iterable[str],
    risks: Mapping[str, ClassRisk],
    op: str,
) -> TestScore:
    """Score one test from the risks of its dependency classes.

    Classes absent from the risk table contribute 0, and zero-risk values
    are dropped before aggregating: they only arise from history-less
    classes and would collapse the geometric and harmonic means.
    ``nonzero_dep_count`` records how many values actually entered the
    operator. A test whose multiset ends up empty scores 0.
    """
    values = []
    dep_count = 0
    for class_id in deps:
        dep_count += 1
        risk = risks.get(class_id)
        if risk is not None and risk.score > 0:
            values.append(risk.score)
    if not values:
        return TestScore(test_id=test_id, score=0.0, dep_count=dep_count, nonzero_dep_count=0)
    return TestScore(
        test_id=test_id,
        score=aggregate(values, op),
        dep_count=dep_count,
        nonzero_dep_count=len(values),
    )
