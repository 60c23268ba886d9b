"""Ego filtering (person / activity) and per-alter contact aggregation."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .errors import ClassifierUnavailable, ValidationError
from .ingestion import EgoTimeline

DAY = 86400.0
YEAR = 365.25 * DAY

REASONS = ("too_few_tweets", "too_short_span", "too_sparse_months", "not_person")


@dataclass(frozen=True)
class PreprocessConfig:
    min_posts: int = 2000
    min_span_days: float = 182.0
    min_posts_per_month: int = 10
    max_sparse_month_fraction: float = 0.5
    active_threshold: float = 1.0  # interactions per year
    duration_floor_years: float = 1.0 / 12.0
    max_posts_per_day: float = 72.0
    min_interaction_ratio: float = 0.01
    labels_path: Optional[str] = None

    def validate(self) -> None:
        if self.min_posts < 0 or self.min_span_days < 0 or self.min_posts_per_month < 0:
            raise ValidationError("preprocessing thresholds must be non-negative")
        if not 0.0 <= self.max_sparse_month_fraction <= 1.0:
            raise ValidationError("max_sparse_month_fraction must lie in [0, 1]")
        if self.active_threshold <= 0 or self.duration_floor_years <= 0:
            raise ValidationError("active_threshold and duration_floor_years must be positive")
        if self.labels_path is not None and not Path(self.labels_path).is_file():
            raise ValidationError(f"ego labels file not found: {self.labels_path}")


@dataclass
class ActivityVerdict:
    ego_id: str
    kept: bool
    reasons: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class RelationshipAggregate:
    ego_id: str
    alter_id: str
    interaction_count: int
    first_ts: float
    last_ts: float
    annualized_frequency: float
    text_interactions: int


# -- person classification ----------------------------------------------------

class HeuristicClassifier:
    """Labels an ego "other" when it posts like an automated account."""

    def __init__(self, max_posts_per_day: float = 72.0, min_interaction_ratio: float = 0.01):
        self.max_posts_per_day = max_posts_per_day
        self.min_interaction_ratio = min_interaction_ratio

    def __call__(self, timeline: EgoTimeline) -> str:
        total = timeline.total_posts
        if total == 0:
            return "other"
        span_days = max((timeline.last_activity - timeline.first_activity) / DAY, 1.0)
        if total / span_days > self.max_posts_per_day:
            return "other"
        if len(timeline.records) / total < self.min_interaction_ratio:
            return "other"
        return "person"


class ExternalLabels:
    """Labels read from a ``ego_id,label`` CSV."""

    def __init__(self, labels: dict[str, str]):
        bad = {v for v in labels.values() if v not in ("person", "other")}
        if bad:
            raise ValidationError(f"unknown ego labels: {sorted(bad)}")
        self.labels = labels

    @classmethod
    def from_csv(cls, path) -> "ExternalLabels":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = csv.DictReader(fh)
            return cls({r["ego_id"]: r["label"].strip() for r in rows})

    def __call__(self, timeline: EgoTimeline) -> str:
        try:
            return self.labels[timeline.ego_id]
        except KeyError:
            raise ClassifierUnavailable(f"no label for ego {timeline.ego_id!r}") from None


def make_classifier(config: PreprocessConfig):
    if config.labels_path:
        return ExternalLabels.from_csv(config.labels_path)
    return HeuristicClassifier(config.max_posts_per_day, config.min_interaction_ratio)


def classify_ego(timeline: EgoTimeline, policy) -> str:
    """Return "person" or "other" using ``policy`` (a classifier callable or a
    PreprocessConfig to build one from)."""
    if isinstance(policy, PreprocessConfig):
        policy = make_classifier(policy)
    return policy(timeline)


# -- activity -----------------------------------------------------------------

def _month_index(ts: float) -> int:
    d = datetime.fromtimestamp(ts, tz=timezone.utc)
    return d.year * 12 + d.month - 1


def monthly_post_counts(timeline: EgoTimeline) -> list[int]:
    """Posts per calendar month, first through last active month inclusive."""
    first, last = _month_index(timeline.first_activity), _month_index(timeline.last_activity)
    counts = Counter(_month_index(ts) for ts in timeline.post_timestamps())
    return [counts.get(m, 0) for m in range(first, last + 1)]


def check_activity(timeline: EgoTimeline, config: PreprocessConfig = PreprocessConfig()) -> ActivityVerdict:
    reasons = []
    if timeline.total_posts < config.min_posts:
        reasons.append("too_few_tweets")
    if timeline.last_activity - timeline.first_activity < config.min_span_days * DAY:
        reasons.append("too_short_span")
    months = monthly_post_counts(timeline)
    sparse = sum(1 for c in months if c < config.min_posts_per_month)
    if sparse / len(months) > config.max_sparse_month_fraction:
        reasons.append("too_sparse_months")
    return ActivityVerdict(timeline.ego_id, kept=not reasons, reasons=reasons)


def evaluate_ego(timeline: EgoTimeline, classifier, config: PreprocessConfig) -> tuple[str, ActivityVerdict]:
    """Person label plus activity verdict; ``not_person`` is folded into the
    verdict reasons so one object answers "does this ego reach the active set"."""
    label = classify_ego(timeline, classifier)
    verdict = check_activity(timeline, config)
    if label != "person":
        verdict.reasons.append("not_person")
        verdict.kept = False
    return label, verdict


# -- relationships ------------------------------------------------------------

def aggregate_relationships(timeline: EgoTimeline, config: PreprocessConfig = PreprocessConfig()) -> list[RelationshipAggregate]:
    """One aggregate per alter, sorted by alter id.

    Duration runs from the first interaction with the alter to the ego's last
    activity, floored at ``duration_floor_years``.
    """
    counts: Counter[str] = Counter()
    texts: Counter[str] = Counter()
    first: dict[str, float] = {}
    last: dict[str, float] = {}
    for rec in timeline.records:
        has_text = bool(rec.text)
        for alter in rec.alter_ids:
            counts[alter] += 1
            if has_text:
                texts[alter] += 1
            if alter not in first:
                first[alter] = rec.timestamp
            last[alter] = rec.timestamp
    out = []
    for alter in sorted(counts):
        years = max((timeline.last_activity - first[alter]) / YEAR, config.duration_floor_years)
        out.append(RelationshipAggregate(
            ego_id=timeline.ego_id,
            alter_id=alter,
            interaction_count=counts[alter],
            first_ts=first[alter],
            last_ts=last[alter],
            annualized_frequency=counts[alter] / years,
            text_interactions=texts[alter],
        ))
    return out


def split_full_active(aggregates: Iterable[RelationshipAggregate], threshold: float = 1.0):
    full = list(aggregates)
    active = [a for a in full if a.annualized_frequency >= threshold]
    return full, active

