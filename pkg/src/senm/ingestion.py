"""Timeline parsing, serialization and hashtag extraction.

A timeline file is UTF-8 JSON lines, one post per line. Communicative posts
carry ``alter_ids``/``kind``; plain posts set ``"noncommunicative": true``.
An optional profile line (``"profile": true``) carries the declared location.
Lines holding a ``format`` key are version headers and are skipped.
"""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import EmptyTimeline, MalformedRecord, ValidationError

log = logging.getLogger(__name__)

KINDS = ("reply", "mention", "quote")
SENTIMENTS = ("positive", "neutral", "negative")
TIMELINE_FORMAT = "senm.timeline"
TIMELINE_VERSION = 1

_HASHTAG = re.compile(r"#(\w+)")


@dataclass(frozen=True)
class InteractionRecord:
    ego_id: str
    alter_ids: tuple[str, ...]
    timestamp: float
    kind: str
    text: Optional[str] = None
    lang: Optional[str] = None
    sentiment: Optional[str] = None
    hashtags: tuple[str, ...] = ()

    def dedup_key(self) -> tuple:
        return (self.ego_id, self.timestamp, self.kind, self.alter_ids, self.text)


@dataclass
class EgoTimeline:
    ego_id: str
    records: list[InteractionRecord]
    noncommunicative_post_count: int
    declared_location: Optional[str]
    first_activity: float
    last_activity: float
    # timestamps of plain posts; needed for month bucketing, not interactions
    noncommunicative_ts: list[float] = field(default_factory=list)
    skipped_unknown_kind: int = field(default=0, compare=False)
    duplicates_dropped: int = field(default=0, compare=False)

    @property
    def total_posts(self) -> int:
        return len(self.records) + self.noncommunicative_post_count

    def post_timestamps(self) -> list[float]:
        return [r.timestamp for r in self.records] + list(self.noncommunicative_ts)


def extract_hashtags(text: str) -> list[str]:
    """Tokens following '#' up to the next non-word character, casing kept."""
    if not text:
        return []
    return _HASHTAG.findall(text)


def _optional_str(obj: dict, key: str, line_no: int) -> Optional[str]:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise MalformedRecord(line_no, f"{key} must be a string")
    return value


def _timestamp(obj: dict, line_no: int) -> float:
    ts = obj.get("ts")
    if ts is None:
        raise MalformedRecord(line_no, "missing ts")
    if isinstance(ts, bool) or not isinstance(ts, (int, float)) or ts <= 0:
        raise MalformedRecord(line_no, "ts must be a positive number")
    return ts


def _opt(value: Optional[str]) -> tuple[bool, str]:
    return (value is not None, value or "")


def _record_order(r: InteractionRecord) -> tuple:
    return (r.timestamp, r.kind, r.alter_ids, _opt(r.text), _opt(r.lang), _opt(r.sentiment), r.hashtags)


def parse_timeline(stream: Iterable[str], ego_id: str) -> EgoTimeline:
    """Parse line-delimited JSON posts for one ego.

    Raises MalformedRecord with the 1-based line number of the first bad line,
    EmptyTimeline when the stream holds no posts at all.
    """
    records: list[InteractionRecord] = []
    seen: set[tuple] = set()
    plain_ts: list[float] = []
    location: Optional[str] = None
    first: Optional[float] = None
    last: Optional[float] = None
    skipped = dropped = lines = 0

    for line_no, raw in enumerate(stream, start=1):
        raw = raw.strip()
        if not raw:
            continue
        lines += 1
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, str(exc)) from None
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "record is not an object")
        if "format" in obj:
            continue
        owner = obj.get("ego_id", ego_id)
        if str(owner) != ego_id:
            raise MalformedRecord(line_no, f"ego_id {owner!r} does not match {ego_id!r}")
        if obj.get("profile"):
            location = _optional_str(obj, "declared_location", line_no)
            continue

        ts = _timestamp(obj, line_no)
        first = ts if first is None else min(first, ts)
        last = ts if last is None else max(last, ts)

        if obj.get("noncommunicative"):
            plain_ts.append(ts)
            continue

        kind = obj.get("kind")
        if kind is None:
            raise MalformedRecord(line_no, "missing kind")
        if kind not in KINDS:
            skipped += 1
            continue
        alters = obj.get("alter_ids")
        if not isinstance(alters, list) or not alters:
            raise MalformedRecord(line_no, "alter_ids must be a non-empty list")
        # self-addressed posts (thread continuations) carry no relationship
        alter_ids = tuple(dict.fromkeys(str(a) for a in alters if str(a) != ego_id))
        if not alter_ids:
            plain_ts.append(ts)
            continue
        sentiment = _optional_str(obj, "sentiment", line_no)
        if sentiment is not None and sentiment not in SENTIMENTS:
            raise MalformedRecord(line_no, f"unknown sentiment {sentiment!r}")
        text = _optional_str(obj, "text", line_no)
        tags = obj.get("hashtags")
        if tags is None:
            tags = extract_hashtags(text or "")
        elif not isinstance(tags, list):
            raise MalformedRecord(line_no, "hashtags must be a list")
        rec = InteractionRecord(
            ego_id=ego_id,
            alter_ids=alter_ids,
            timestamp=ts,
            kind=kind,
            text=text,
            lang=_optional_str(obj, "lang", line_no),
            sentiment=sentiment,
            hashtags=tuple(str(t) for t in tags),
        )
        records.append(rec)

    if first is None:
        if lines == 0:
            raise EmptyTimeline(f"timeline for ego {ego_id!r} is empty")
        raise EmptyTimeline(f"timeline for ego {ego_id!r} has no posts")
    if skipped:
        log.warning("ego %s: skipped %d records of unknown kind", ego_id, skipped)

    # total order over every field, so the duplicate that survives is independent of line order
    records.sort(key=_record_order)
    unique = []
    for rec in records:
        key = rec.dedup_key()
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
        unique.append(rec)
    records = unique
    plain_ts.sort()
    return EgoTimeline(
        ego_id=ego_id,
        records=records,
        noncommunicative_post_count=len(plain_ts),
        declared_location=location,
        first_activity=first,
        last_activity=last,
        noncommunicative_ts=plain_ts,
        skipped_unknown_kind=skipped,
        duplicates_dropped=dropped,
    )


def record_to_dict(rec: InteractionRecord) -> dict:
    out = {"ego_id": rec.ego_id, "alter_ids": list(rec.alter_ids), "ts": rec.timestamp, "kind": rec.kind}
    if rec.text is not None:
        out["text"] = rec.text
    if rec.lang is not None:
        out["lang"] = rec.lang
    if rec.sentiment is not None:
        out["sentiment"] = rec.sentiment
    out["hashtags"] = list(rec.hashtags)
    return out


def serialize_timeline(timeline: EgoTimeline, header: bool = True) -> Iterator[str]:
    """Yield JSON lines that parse_timeline reads back into an equal timeline."""
    if header:
        yield json.dumps({"format": TIMELINE_FORMAT, "version": TIMELINE_VERSION})
    if timeline.declared_location is not None:
        yield json.dumps(
            {"ego_id": timeline.ego_id, "profile": True, "declared_location": timeline.declared_location},
            ensure_ascii=False,
        )
    posts = [(r.timestamp, 0, record_to_dict(r)) for r in timeline.records]
    posts += [(ts, 1, {"ego_id": timeline.ego_id, "ts": ts, "noncommunicative": True})
              for ts in timeline.noncommunicative_ts]
    posts.sort(key=lambda p: (p[0], p[1]))
    for _, _, obj in posts:
        yield json.dumps(obj, ensure_ascii=False)


def write_timeline(timeline: EgoTimeline, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in serialize_timeline(timeline):
            fh.write(line + "\n")


def read_timeline(path: Path, ego_id: Optional[str] = None) -> EgoTimeline:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_timeline(fh, ego_id or path.stem)
        except MalformedRecord as exc:
            raise MalformedRecord(exc.line_no, f"{path.name}: {exc.reason}") from None


def read_manifest(path: Path) -> dict[str, Path]:
    """Read a dataset manifest CSV (``name,path``); relative paths resolve
    against the manifest's directory. A directory argument means
    ``<dir>/datasets.csv``."""
    path = Path(path)
    if path.is_dir():
        path = path / "datasets.csv"
    if not path.is_file():
        raise ValidationError(f"dataset manifest not found: {path}")
    out: dict[str, Path] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            name, loc = row.get("name"), row.get("path")
            if not name or not loc:
                raise ValidationError(f"{path}: rows need 'name' and 'path'")
            p = Path(loc)
            out[name] = p if p.is_absolute() else path.parent / p
    for name, p in out.items():
        if not p.is_dir():
            raise ValidationError(f"dataset {name!r}: directory not found: {p}")
    return out


def write_manifest(datasets: dict[str, str], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "path"])
        for name, loc in datasets.items():
            w.writerow([name, loc])


def timeline_paths(directory: Path) -> list[Path]:
    return sorted(Path(directory).glob("*.jsonl"))


def load_dataset(directory: Path) -> list[EgoTimeline]:
    return [read_timeline(p) for p in timeline_paths(directory)]
