"""Sentiment providers, the negative-interaction threshold rule, and assembly
of signed ego networks."""
from __future__ import annotations

import csv
import hashlib
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .circles import CircleStructure
from .errors import AlterMismatch, MissingText, ValidationError
from .ingestion import SENTIMENTS, EgoTimeline, InteractionRecord
from .preprocessing import RelationshipAggregate
from .topics import canonical_form, tokenize_words

DEFAULT_THRESHOLD = 0.17  # one negative per five positives


# -- providers ----------------------------------------------------------------

class PrecomputedProvider:
    """Returns labels stored on the records, optionally overridden by a
    sidecar table keyed by (ego_id, interaction index)."""

    name = "precomputed"

    def __init__(self, sidecar: Optional[Mapping[tuple[str, int], str]] = None):
        self.sidecar = dict(sidecar or {})

    @classmethod
    def from_csv(cls, path) -> "PrecomputedProvider":
        table = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                label = row["label"].strip()
                if label not in SENTIMENTS:
                    raise ValidationError(f"{path}: unknown label {label!r}")
                table[(row["ego_id"], int(row["interaction_index"]))] = label
        return cls(table)

    def label(self, record: InteractionRecord, index: Optional[int] = None) -> str:
        if index is not None and self.sidecar:
            found = self.sidecar.get((record.ego_id, index))
            if found is not None:
                return found
        if record.sentiment is None:
            raise MissingText("record has no precomputed sentiment")
        return record.sentiment


class LexiconProvider:
    """Sums token valences; the sign of the sum beyond +/-tau decides."""

    name = "lexicon"

    def __init__(self, lexicons: Mapping[str, Mapping[str, float]], tau: float = 0.5, default_lang: str = "default"):
        self.lexicons = {lang: {canonical_form(k): float(v) for k, v in lex.items()} for lang, lex in lexicons.items()}
        self.tau = tau
        self.default_lang = default_lang
        merged: dict[str, float] = {}
        for lang in sorted(self.lexicons):
            merged.update(self.lexicons[lang])
        self._merged = merged

    @classmethod
    def from_path(cls, path, tau: float = 0.5) -> "LexiconProvider":
        """A CSV file (``token,valence``) or a directory of ``<lang>.csv`` files."""
        path = Path(path)
        if path.is_dir():
            files = sorted(path.glob("*.csv"))
            if not files:
                raise ValidationError(f"no lexicon files in {path}")
            return cls({p.stem: _read_lexicon(p) for p in files}, tau=tau)
        if not path.is_file():
            raise ValidationError(f"lexicon file not found: {path}")
        return cls({"default": _read_lexicon(path)}, tau=tau)

    def _lexicon_for(self, lang: Optional[str]) -> Mapping[str, float]:
        if lang:
            base = lang.split("-")[0].lower()
            if base in self.lexicons:
                return self.lexicons[base]
        if self.default_lang in self.lexicons:
            return self.lexicons[self.default_lang]
        return self._merged

    def score(self, text: str, lang: Optional[str] = None) -> float:
        lex = self._lexicon_for(lang)
        return sum(lex.get(tok, 0.0) for tok in tokenize_words(text))

    def label(self, record: InteractionRecord, index: Optional[int] = None) -> str:
        if not record.text:
            raise MissingText("record has no text")
        s = self.score(record.text, record.lang)
        if s < -self.tau:
            return "negative"
        if s > self.tau:
            return "positive"
        return "neutral"


def _read_lexicon(path: Path) -> dict[str, float]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["token"]: float(row["valence"]) for row in csv.DictReader(fh)}


class ShiftedProvider:
    """Wraps a provider and relabels ``source`` labels as ``target`` with a
    fixed probability. The coin for each record is a hash of the seed and the
    record, so results do not depend on processing order."""

    def __init__(self, base, probability: float = 0.25, seed: int = 0,
                 source: str = "neutral", target: str = "negative"):
        if not 0.0 <= probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        self.base = base
        self.probability = probability
        self.seed = seed
        self.source = source
        self.target = target
        self.name = f"{base.name}+shifted"

    def _coin(self, record: InteractionRecord) -> float:
        key = repr((self.seed, record.ego_id, record.timestamp, record.kind, record.alter_ids, record.text))
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2.0**64

    def label(self, record: InteractionRecord, index: Optional[int] = None) -> str:
        lab = self.base.label(record, index)
        if lab == self.source and self._coin(record) < self.probability:
            return self.target
        return lab


def label_interaction(provider, record: InteractionRecord, index: Optional[int] = None) -> str:
    return provider.label(record, index)


# -- signs --------------------------------------------------------------------

def _exact(threshold: float) -> Fraction:
    return Fraction(str(threshold)) if isinstance(threshold, float) else Fraction(threshold)


def sign_from_counts(negative: int, labeled: int, threshold: float = DEFAULT_THRESHOLD) -> str:
    """Negative iff negative/labeled exceeds the threshold; the boundary is positive."""
    if labeled == 0:
        return "unsigned"
    return "negative" if Fraction(negative, labeled) > _exact(threshold) else "positive"


def sign_relationship(labels: Iterable[str], threshold: float = DEFAULT_THRESHOLD) -> str:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    counts = Counter(labels)
    return sign_from_counts(counts["negative"], sum(counts.values()), threshold)


@dataclass
class SignedRelationship:
    ego_id: str
    alter_id: str
    labeled_count: int
    negative_count: int
    sign: str
    circle_index: Optional[int] = None


@dataclass
class SigningDiagnostics:
    labeled: int = 0
    missing: int = 0


def sign_relationships(
    timeline: EgoTimeline,
    aggregates: Sequence[RelationshipAggregate],
    provider,
    threshold: float = DEFAULT_THRESHOLD,
    diagnostics: Optional[SigningDiagnostics] = None,
) -> list[SignedRelationship]:
    """Label every interaction once and fold the labels into one signed
    relationship per aggregate, in aggregate order."""
    wanted = {a.alter_id for a in aggregates}
    labeled: Counter = Counter()
    negative: Counter = Counter()
    diag = diagnostics if diagnostics is not None else SigningDiagnostics()
    for index, rec in enumerate(timeline.records):
        targets = [a for a in rec.alter_ids if a in wanted]
        if not targets:
            continue
        try:
            lab = provider.label(rec, index)
        except MissingText:
            diag.missing += 1
            continue
        diag.labeled += 1
        for alter in targets:
            labeled[alter] += 1
            if lab == "negative":
                negative[alter] += 1
    return [
        SignedRelationship(
            ego_id=timeline.ego_id,
            alter_id=a.alter_id,
            labeled_count=labeled[a.alter_id],
            negative_count=negative[a.alter_id],
            sign=sign_from_counts(negative[a.alter_id], labeled[a.alter_id], threshold),
        )
        for a in aggregates
    ]


# -- signed ego networks ------------------------------------------------------

@dataclass
class SignedEgoNetwork:
    ego_id: str
    circles: CircleStructure
    relationships: list[SignedRelationship]
    full_relationships: list[SignedRelationship] = field(default_factory=list)

    def circle_counts(self, k: Optional[int] = None, nested: bool = True) -> list[tuple[int, int]]:
        """(negatives, signed) inside each nested circle 0..k-1, or inside each
        ring (single cluster) when ``nested`` is false."""
        k = self.circles.optimum_circles if k is None else k
        neg = [0] * k
        signed = [0] * k
        for rel in self.relationships:
            if rel.sign == "unsigned" or rel.circle_index is None or rel.circle_index >= k:
                continue
            for c in range(rel.circle_index, k if nested else rel.circle_index + 1):
                signed[c] += 1
                if rel.sign == "negative":
                    neg[c] += 1
        return list(zip(neg, signed))


def build_senm(circles: CircleStructure, signed: Sequence[SignedRelationship],
               full: Optional[Sequence[SignedRelationship]] = None) -> SignedEgoNetwork:
    """Attach each active relationship to its (innermost) circle."""
    by_alter = {}
    for rel in signed:
        if rel.alter_id not in circles.membership:
            raise AlterMismatch(f"alter {rel.alter_id!r} is not in the circles of ego {circles.ego_id!r}")
        by_alter[rel.alter_id] = replace(rel, circle_index=circles.membership[rel.alter_id])
    missing = set(circles.membership) - set(by_alter)
    if missing:
        raise AlterMismatch(f"no signed relationship for alters {sorted(missing)[:5]}")
    rels = [by_alter[a] for a in sorted(by_alter)]
    return SignedEgoNetwork(circles.ego_id, circles, rels, list(full) if full is not None else [])
