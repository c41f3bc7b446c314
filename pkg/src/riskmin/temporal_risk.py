"""Time-decayed risk scoring for production classes.

A class's risk is the sum of its modification-event weights, each damped
by an exponential factor of the event's age. The damping is parameterized
by a half-life: an event's influence halves every ``half_life_days`` days.
Static mode (no half-life) weights all history uniformly, which reproduces
plain change-count / change-churn aggregation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .change_history import ChangeEvent, ClassHistory

SECONDS_PER_DAY = 86_400.0

METRIC_FREQUENCY = "frequency"
METRIC_EXTENT = "extent"
METRICS = (METRIC_FREQUENCY, METRIC_EXTENT)


def alpha_from_half_life(half_life_days: float) -> float:
    """Decay rate per day for a given half-life: ln(2) / T."""
    if not half_life_days > 0:
        raise ValueError(f"half-life must be positive, got {half_life_days}")
    return math.log(2.0) / half_life_days


@dataclass(frozen=True)
class RiskConfig:
    """Change metric, temporal horizon, and evaluation time.

    ``half_life_days=None`` selects static mode (decay factor 1 for every
    event). ``reference_time`` is the evaluation instant; events after it
    are ignored.
    """

    metric: str
    half_life_days: float | None
    reference_time: int

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.half_life_days is not None and not self.half_life_days > 0:
            raise ValueError(f"half-life must be positive, got {self.half_life_days}")

    @property
    def is_static(self) -> bool:
        return self.half_life_days is None

    @property
    def alpha(self) -> float:
        """Decay rate per day; 0.0 in static mode (factor identically 1)."""
        if self.half_life_days is None:
            return 0.0
        return alpha_from_half_life(self.half_life_days)


@dataclass(frozen=True)
class ClassRisk:
    class_id: str
    score: float


def event_age_days(event: ChangeEvent, reference_time: int) -> float:
    """Elapsed days (fractional) from the event to the reference time.

    Negative for events after the reference time; callers filter those.
    """
    return (reference_time - event.timestamp) / SECONDS_PER_DAY


def event_weight(event: ChangeEvent, metric: str) -> float:
    """Per-event weight: 1 under frequency, ln(1 + churn) under extent."""
    if metric == METRIC_FREQUENCY:
        return 1.0
    if metric == METRIC_EXTENT:
        return math.log1p(event.churn)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def class_risk(history: ClassHistory, cfg: RiskConfig) -> ClassRisk:
    """Sum of decayed event weights over the in-scope history.

    Events newer than the reference time are excluded so that scores for a
    past evaluation point never see the future. Summation runs in the
    history's chronological order to keep results bit-deterministic.
    """
    alpha = cfg.alpha
    total = 0.0
    for event in history.events:
        age = event_age_days(event, cfg.reference_time)
        if age < 0:
            continue
        total += event_weight(event, cfg.metric) * math.exp(-alpha * age)
    return ClassRisk(class_id=history.class_id, score=total)


def risk_table(histories: Mapping[str, ClassHistory], cfg: RiskConfig) -> dict[str, ClassRisk]:
    """Score every class in the map; classes not present are implicitly 0."""
    return {class_id: class_risk(history, cfg) for class_id, history in histories.items()}
