"""Dataset-level statistics: negativity, circle counts and sizes, per-circle
negativity, provider drift, location tables."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .circles import CircleStructure
from .errors import InsufficientEgos, NoMatchingEgos, NoSignedRelationships, SenmError
from .preprocessing import ActivityVerdict, RelationshipAggregate
from .signing import SignedEgoNetwork, SignedRelationship, build_senm, sign_relationships

UNKNOWN = "UNK"


@dataclass
class EgoResult:
    """Everything the pipeline learned about one ego."""

    ego_id: str
    label: str
    verdict: ActivityVerdict
    aggregates: list[RelationshipAggregate]
    active: frozenset
    signed: list[SignedRelationship]
    circles: Optional[CircleStructure] = None
    alt_signed: Optional[list[SignedRelationship]] = None
    location: Optional[str] = None

    @property
    def is_person(self) -> bool:
        return self.label == "person"

    @property
    def kept(self) -> bool:
        return self.verdict.kept

    def full_relationships(self, alt: bool = False) -> list[SignedRelationship]:
        if not self.is_person:
            return []
        return list(self.alt_signed if alt else self.signed)

    def active_relationships(self, alt: bool = False) -> list[SignedRelationship]:
        if not self.kept:
            return []
        return [r for r in (self.alt_signed if alt else self.signed) if r.alter_id in self.active]

    def network(self) -> Optional[SignedEgoNetwork]:
        if not self.kept or self.circles is None:
            return None
        return build_senm(self.circles, self.active_relationships(), self.full_relationships())


def full_scope(egos: Iterable[EgoResult], alt: bool = False) -> list[SignedRelationship]:
    return [r for e in egos for r in e.full_relationships(alt)]


def active_scope(egos: Iterable[EgoResult], alt: bool = False) -> list[SignedRelationship]:
    return [r for e in egos for r in e.active_relationships(alt)]


# -- negativity ---------------------------------------------------------------

def negativity_percentage(relationships: Iterable[SignedRelationship]) -> float:
    signs = Counter(r.sign for r in relationships)
    signed = signs["negative"] + signs["positive"]
    if signed == 0:
        raise NoSignedRelationships("no signed relationships in scope")
    return 100.0 * signs["negative"] / signed


@dataclass(frozen=True)
class NegativityRow:
    dataset: str
    full: float
    active: float

    @property
    def delta(self) -> float:
        return self.active - self.full


def negativity_row(name: str, egos: Sequence[EgoResult], alt: bool = False) -> NegativityRow:
    return NegativityRow(name, negativity_percentage(full_scope(egos, alt)),
                         negativity_percentage(active_scope(egos, alt)))


def full_vs_active_rows(datasets: Mapping[str, Sequence[EgoResult]]) -> list[NegativityRow]:
    return [negativity_row(name, egos) for name, egos in datasets.items()]


@dataclass(frozen=True)
class DriftRow:
    provider: str
    full: float
    active: float

    @property
    def delta(self) -> float:
        return self.active - self.full


def compare_providers(egos: Sequence[EgoResult], timelines: Mapping[str, object],
                      provider_a, provider_b, threshold: float = 0.17) -> list[DriftRow]:
    """Re-sign every ego under both providers and report full/active negativity."""
    rows = []
    for provider in (provider_a, provider_b):
        full, active = [], []
        for e in egos:
            if not e.is_person:
                continue
            signed = sign_relationships(timelines[e.ego_id], e.aggregates, provider, threshold)
            full.extend(signed)
            if e.kept:
                active.extend(r for r in signed if r.alter_id in e.active)
        rows.append(DriftRow(provider.name, negativity_percentage(full), negativity_percentage(active)))
    return rows


def drift_rows(egos: Sequence[EgoResult], name_a: str, name_b: str) -> list[DriftRow]:
    """Drift rows from relationships already signed by both providers."""
    a = negativity_row("", egos)
    b = negativity_row("", egos, alt=True)
    return [DriftRow(name_a, a.full, a.active), DriftRow(name_b, b.full, b.active)]


# -- circles ------------------------------------------------------------------

@dataclass(frozen=True)
class CircleCountSummary:
    mean: float
    ci_low: float
    ci_high: float
    n: int
    n_target: int


def t_interval(values: Sequence[float], confidence: float = 0.95) -> tuple[float, float, float]:
    x = np.asarray(values, dtype=float)
    n = x.size
    mean = float(x.mean())
    s = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * s / math.sqrt(n)
    return mean, mean - half, mean + half


def mean_optimum_circles(counts: Sequence[int], k: int = 5) -> CircleCountSummary:
    """Mean optimum circle count with a Student-t 95% interval; ``n_target``
    counts egos with exactly ``k`` circles."""
    if len(counts) < 2:
        raise InsufficientEgos(f"need at least 2 non-degenerate egos, got {len(counts)}")
    mean, lo, hi = t_interval(counts)
    return CircleCountSummary(mean, lo, hi, len(counts), sum(1 for c in counts if c == k))


def mean_circle_sizes(circles: Sequence[CircleStructure], k: int = 5) -> list[float]:
    chosen = [c for c in circles if c.optimum_circles == k]
    if not chosen:
        raise NoMatchingEgos(f"no egos with {k} circles")
    return [float(v) for v in np.mean([c.nested_sizes for c in chosen], axis=0)]


@dataclass(frozen=True)
class CircleNegativity:
    mean_negative: float
    percentage: float


def per_circle_negativity(networks: Sequence[SignedEgoNetwork], k: int = 5,
                          per_ego: bool = False, nested: bool = True) -> list[CircleNegativity]:
    """Mean negative count per nested circle and the negative percentage,
    pooled across egos (Σneg/Σsigned) or averaged per ego. With
    ``nested=False`` each row covers one ring only."""
    chosen = [n for n in networks if n.circles.optimum_circles == k]
    if not chosen:
        raise NoMatchingEgos(f"no egos with {k} circles")
    counts = np.array([n.circle_counts(k, nested) for n in chosen], dtype=float)  # egos x k x 2
    neg, signed = counts[:, :, 0], counts[:, :, 1]
    rows = []
    for c in range(k):
        if per_ego:
            mask = signed[:, c] > 0
            pct = float(np.mean(neg[mask, c] / signed[mask, c])) * 100.0 if mask.any() else float("nan")
        else:
            total = signed[:, c].sum()
            pct = 100.0 * neg[:, c].sum() / total if total else float("nan")
        rows.append(CircleNegativity(float(neg[:, c].mean()), pct))
    return rows


# -- locations ----------------------------------------------------------------

def load_location_map(path) -> dict[str, tuple[str, str]]:
    """CSV with ``location,country,continent``."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["location"].strip().casefold()] = (row["country"].strip(), row["continent"].strip())
    return out


@dataclass(frozen=True)
class LocationRow:
    name: str
    egos: int
    relationships: int


def aggregate_by_location(egos: Iterable[tuple[Optional[str], int]], mapping: Mapping[str, tuple[str, str]],
                          min_country_egos: int = 3) -> tuple[list[LocationRow], list[LocationRow]]:
    """Ego and relationship counts per country and per continent.

    ``egos`` yields (declared location, relationship count). Only countries
    with at least ``min_country_egos`` egos are listed; continents are never
    filtered.
    """
    country_egos: Counter = Counter()
    country_rels: Counter = Counter()
    cont_egos: Counter = Counter()
    cont_rels: Counter = Counter()
    for loc, rels in egos:
        key = loc.strip().casefold() if loc else None
        country, continent = mapping.get(key, (UNKNOWN, UNKNOWN)) if key else (UNKNOWN, UNKNOWN)
        country_egos[country] += 1
        country_rels[country] += rels
        cont_egos[continent] += 1
        cont_rels[continent] += rels

    def rows(e: Counter, r: Counter, floor: int) -> list[LocationRow]:
        keep = [LocationRow(n, e[n], r[n]) for n in e if e[n] >= floor]
        return sorted(keep, key=lambda x: (-x.egos, -x.relationships, x.name))

    return rows(country_egos, country_rels, min_country_egos), rows(cont_egos, cont_rels, 1)


# -- dataset report -----------------------------------------------------------

@dataclass(frozen=True)
class Descriptives:
    egos: int
    relationships: int
    interactions: int


def descriptives(egos: Sequence[EgoResult]) -> tuple[Descriptives, Descriptives]:
    person = [e for e in egos if e.is_person]
    kept = [e for e in egos if e.kept]
    full = Descriptives(len(person), sum(len(e.aggregates) for e in person),
                        sum(a.interaction_count for e in person for a in e.aggregates))
    act = [a for e in kept for a in e.aggregates if a.alter_id in e.active]
    active = Descriptives(len(kept), len(act), sum(a.interaction_count for a in act))
    return full, active


@dataclass
class DatasetReport:
    dataset: str
    full_negativity: Optional[float] = None
    active_negativity: Optional[float] = None
    circle_counts: Optional[CircleCountSummary] = None
    mean_circle_sizes: Optional[list[float]] = None
    per_circle_negativity: Optional[list[CircleNegativity]] = None
    provider_drift: Optional[list[DriftRow]] = None
    full: Optional[Descriptives] = None
    active: Optional[Descriptives] = None
    degenerate_egos: int = 0
    problems: list[str] = field(default_factory=list)

    @property
    def delta(self) -> Optional[float]:
        if self.full_negativity is None or self.active_negativity is None:
            return None
        return self.active_negativity - self.full_negativity

    @property
    def egos_with_k_circles(self) -> int:
        return self.circle_counts.n_target if self.circle_counts else 0


def build_report(name: str, egos: Sequence[EgoResult], k: int = 5, per_ego: bool = False,
                 drift_names: Optional[tuple[str, str]] = None) -> DatasetReport:
    """Compute every statistic for one dataset. Statistics that cannot be
    computed are left empty and the reason is recorded in ``problems``."""
    rep = DatasetReport(name)
    rep.full, rep.active = descriptives(egos)

    def attempt(fn):
        try:
            return fn()
        except SenmError as exc:
            rep.problems.append(f"{type(exc).__name__}: {exc}")
            return None

    rep.full_negativity = attempt(lambda: negativity_percentage(full_scope(egos)))
    rep.active_negativity = attempt(lambda: negativity_percentage(active_scope(egos)))
    kept = [e for e in egos if e.kept]
    circles = [e.circles for e in kept if e.circles is not None]
    rep.degenerate_egos = len(kept) - len(circles)
    rep.circle_counts = attempt(lambda: mean_optimum_circles([c.optimum_circles for c in circles], k))
    rep.mean_circle_sizes = attempt(lambda: mean_circle_sizes(circles, k))
    networks = [n for n in (e.network() for e in kept) if n is not None]
    rep.per_circle_negativity = attempt(lambda: per_circle_negativity(networks, k, per_ego))
    if drift_names and all(e.alt_signed is not None for e in egos if e.is_person):
        rep.provider_drift = attempt(lambda: drift_rows(egos, *drift_names))
    return rep
