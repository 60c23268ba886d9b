"""Term normalization and ranking, topic labels, topic/negativity correlation."""
from __future__ import annotations

import csv
import logging
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateVariance, ValidationError
from .ingestion import InteractionRecord

log = logging.getLogger(__name__)

TOPICS = ("political", "covid", "climate", "religious", "news", "general")
FEATURES = ("count", "mentions", "proportion")
MIN_WORD_LENGTH = 5  # words of 4 letters or fewer are dropped

_WORD = re.compile(r"\w+")
_STRIP_FROM_TEXT = re.compile(r"(?:https?://\S+)|(?:[#@]\w+)")


_ASCII_PUNCT = {i: None for i in range(128) if unicodedata.category(chr(i)).startswith("P")}


def canonical_form(token: str) -> str:
    """Lowercase, strip diacritics and punctuation."""
    if token.isascii():
        return token.lower().translate(_ASCII_PUNCT)
    return _canonical_unicode(token)


@lru_cache(maxsize=1 << 16)
def _canonical_unicode(token: str) -> str:
    out = token
    # a second pass settles the rare characters whose lowercase decomposes
    for _ in range(2):
        out = unicodedata.normalize("NFD", out.lower())
        out = "".join(ch for ch in out if not unicodedata.category(ch).startswith(("M", "P")))
        out = unicodedata.normalize("NFC", out)
    return out


def normalize_token(token: str, kind: str = "word", stopwords: Optional[frozenset] = None) -> Optional[str]:
    """Normalized term, or None when a word is a stopword or too short.
    Hashtags only go through canonicalization."""
    if kind not in ("word", "hashtag"):
        raise ValueError(f"unknown term kind {kind!r}")
    norm = canonical_form(token)
    if not norm:
        return None
    if kind == "word":
        if len(norm) < MIN_WORD_LENGTH:
            return None
        if stopwords and norm in stopwords:
            return None
    return norm


def tokenize_words(text: str) -> list[str]:
    """Word tokens of a post, hashtags, mentions and links removed."""
    return _WORD.findall(canonical_form(_STRIP_FROM_TEXT.sub(" ", text)))


# -- stopwords ----------------------------------------------------------------

class Stopwords:
    """Per-language stopword sets; unknown or missing language uses all lists merged."""

    def __init__(self, by_lang: Mapping[str, frozenset]):
        self.by_lang = dict(by_lang)
        self.merged = frozenset().union(*self.by_lang.values()) if self.by_lang else frozenset()

    @classmethod
    def load(cls, directory: Optional[Path] = None) -> "Stopwords":
        if directory is None:
            root = resources.files("senm") / "data" / "stopwords"
            files = [(p.name, p.read_text(encoding="utf-8")) for p in root.iterdir() if p.name.endswith(".txt")]
        else:
            files = [(p.name, p.read_text(encoding="utf-8")) for p in sorted(Path(directory).glob("*.txt"))]
        by_lang = {}
        for name, body in files:
            words = (canonical_form(w) for w in body.split())
            by_lang[name[:-4]] = frozenset(w for w in words if w)
        return cls(by_lang)

    def for_lang(self, lang: Optional[str]) -> frozenset:
        if lang:
            base = lang.split("-")[0].lower()
            if base in self.by_lang:
                return self.by_lang[base]
        return self.merged


# -- ranking ------------------------------------------------------------------

@dataclass(frozen=True)
class TermStats:
    term: str
    kind: str
    mentions: int
    rank: int
    topic: Optional[str] = None


class TermRanking(list):
    """List of TermStats; ``truncated`` is set when fewer than k terms existed."""

    truncated = False


def count_terms(records: Iterable[InteractionRecord], kind: str, stopwords: Optional[Stopwords] = None) -> Counter:
    """Per-occurrence counts of normalized terms."""
    counts: Counter = Counter()
    for rec in records:
        if kind == "hashtag":
            for tag in rec.hashtags:
                norm = normalize_token(tag, "hashtag")
                if norm:
                    counts[norm] += 1
        elif rec.text:
            stop = stopwords.for_lang(rec.lang) if stopwords else None
            for tok in tokenize_words(rec.text):
                norm = normalize_token(tok, "word", stop)
                if norm:
                    counts[norm] += 1
    return counts


def rank_counts(counts: Mapping[str, int], kind: str, k: int = 20) -> TermRanking:
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    out = TermRanking(TermStats(term, kind, n, i + 1) for i, (term, n) in enumerate(ordered))
    if len(out) < k:
        out.truncated = True
    return out


def top_k_terms(records: Iterable[InteractionRecord], kind: str, k: int = 20,
                stopwords: Optional[Stopwords] = None) -> TermRanking:
    """Most frequent normalized terms, ties broken lexicographically."""
    ranking = rank_counts(count_terms(records, kind, stopwords), kind, k)
    if ranking.truncated:
        log.warning("only %d %s terms available, fewer than k=%d", len(ranking), kind, k)
    return ranking


def load_labelmap(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            topic = row["topic"].strip().lower()
            if topic not in TOPICS:
                raise ValidationError(f"{path}: unknown topic {topic!r}")
            out[canonical_form(row["term"])] = topic
    return out


def default_labelmap() -> dict[str, str]:
    with resources.as_file(resources.files("senm") / "data" / "labelmap.csv") as p:
        return load_labelmap(p)


def assign_topic_labels(terms: Sequence[TermStats], labelmap: Mapping[str, str]) -> list[TermStats]:
    return [replace(t, topic=labelmap.get(t.term, "general")) for t in terms]


# -- correlation --------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationResult:
    r: float
    df: int
    p_two_tailed: float
    feature: str = ""


def pearson_with_p(x: Sequence[float], y: Sequence[float], feature: str = "") -> CorrelationResult:
    """Pearson r with a two-tailed p-value from Student's t on n-2 df."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    n = xa.size
    if n < 3:
        raise ValueError("need at least 3 paired values")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateVariance(f"zero variance in {'x' if sxx == 0 else 'y'}")
    # scale first so the product cannot overflow or underflow
    r = float((dx / math.sqrt(sxx)) @ (dy / math.sqrt(syy)))
    # within a few ulps of +/-1 the t statistic is pure rounding noise
    if 1.0 - abs(r) <= 4 * np.finfo(float).eps:
        r = math.copysign(1.0, r)
    df = n - 2
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), df))
    return CorrelationResult(r=r, df=df, p_two_tailed=min(1.0, p), feature=feature)


def topic_features(terms: Sequence[TermStats]) -> dict[str, tuple[int, int, float]]:
    """Per topic: (entries in the list, their mentions, share of all mentions)."""
    total = sum(t.mentions for t in terms)
    out = {}
    for topic in TOPICS:
        chosen = [t for t in terms if (t.topic or "general") == topic]
        mentions = sum(t.mentions for t in chosen)
        out[topic] = (len(chosen), mentions, mentions / total if total else 0.0)
    return out


def topic_negativity_features(datasets: Mapping[str, Sequence[TermStats]]) -> dict[str, dict[str, tuple[int, int, float]]]:
    """Feature matrix keyed by dataset then topic."""
    return {name: topic_features(terms) for name, terms in datasets.items()}


def correlate_features(features: Mapping[str, Mapping[str, tuple]], negativity: Mapping[str, float]) -> list[CorrelationResult]:
    """Correlate every topic feature with per-dataset negativity. Features with
    no variance across datasets are skipped."""
    names = sorted(features)
    y = [negativity[n] for n in names]
    out = []
    for topic in TOPICS:
        for i, feat in enumerate(FEATURES):
            x = [features[n][topic][i] for n in names]
            try:
                out.append(pearson_with_p(x, y, feature=f"{topic}.{feat}"))
            except DegenerateVariance:
                log.info("skipping %s.%s: no variance", topic, feat)
    return out
