"""Stage orchestration: ingest -> preprocess -> circles -> sign -> analyze -> topics.

Each stage writes JSON-lines files under ``<out>/stages/<stage>/`` headed by a
version line, so any stage can be rerun from its predecessors' files. Reports
go to ``<out>`` itself.
"""
from __future__ import annotations

import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

from . import analysis, topics
from .circles import CircleStructure, CirclesConfig, compute_circles
from .errors import SenmError, ValidationError
from .ingestion import EgoTimeline, read_manifest, read_timeline, timeline_paths, write_manifest, write_timeline
from .preprocessing import (
    ActivityVerdict, PreprocessConfig, RelationshipAggregate, aggregate_relationships,
    evaluate_ego, make_classifier, split_full_active,
)
from .signing import (
    LexiconProvider, PrecomputedProvider, ShiftedProvider, SignedRelationship,
    SigningDiagnostics, sign_relationships,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

STAGES = ("ingest", "preprocess", "circles", "sign", "analyze", "topics")
TABLES = ("2", "3", "4", "5", "6", "7", "locations")
FORMAT_VERSION = 1


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class SigningConfig:
    provider: str = "precomputed"
    sidecar_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    tau: float = 0.5
    threshold: float = 0.17
    compare: str = "shifted"  # shifted | precomputed | lexicon | none
    shift_probability: float = 0.25

    def validate(self) -> None:
        if self.provider not in ("precomputed", "lexicon"):
            raise ValidationError(f"unknown provider {self.provider!r}")
        if self.compare not in ("shifted", "precomputed", "lexicon", "none"):
            raise ValidationError(f"unknown comparison provider {self.compare!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError("sign threshold must lie in (0, 1)")
        if self.tau < 0:
            raise ValidationError("tau must be non-negative")
        if not 0.0 <= self.shift_probability <= 1.0:
            raise ValidationError("shift_probability must lie in [0, 1]")
        if self.sidecar_path and not Path(self.sidecar_path).is_file():
            raise ValidationError(f"sentiment sidecar not found: {self.sidecar_path}")
        if "lexicon" in (self.provider, self.compare):
            if not self.lexicon_path:
                raise ValidationError("lexicon provider selected but no lexicon file given")
            if not Path(self.lexicon_path).exists():
                raise ValidationError(f"lexicon file not found: {self.lexicon_path}")


@dataclass(frozen=True)
class AnalysisConfig:
    circles_filter: int = 5
    per_ego_averaging: bool = False
    locations_path: Optional[str] = None
    min_country_egos: int = 3

    def validate(self) -> None:
        if self.circles_filter < 1:
            raise ValidationError("circles_filter must be >= 1")
        if self.locations_path and not Path(self.locations_path).is_file():
            raise ValidationError(f"location map not found: {self.locations_path}")


@dataclass(frozen=True)
class TopicsConfig:
    k: int = 20
    labelmap_path: Optional[str] = None
    stopwords_dir: Optional[str] = None

    def validate(self) -> None:
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.labelmap_path and not Path(self.labelmap_path).is_file():
            raise ValidationError(f"labelmap not found: {self.labelmap_path}")
        if self.stopwords_dir and not Path(self.stopwords_dir).is_dir():
            raise ValidationError(f"stopword directory not found: {self.stopwords_dir}")


@dataclass
class PipelineConfig:
    out: Path
    data: Optional[Path] = None
    preprocessing: PreprocessConfig = field(default_factory=PreprocessConfig)
    circles: CirclesConfig = field(default_factory=CirclesConfig)
    signing: SigningConfig = field(default_factory=SigningConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    topics: TopicsConfig = field(default_factory=TopicsConfig)
    seed: int = 0
    jobs: int = 1
    datasets: Optional[list[str]] = None
    tables: Optional[list[str]] = None

    def validate(self) -> None:
        if self.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        for name, section in (("preprocess", self.preprocessing), ("circles", self.circles),
                              ("sign", self.signing), ("analyze", self.analysis), ("topics", self.topics)):
            with stage(name):
                section.validate()
        if self.tables:
            bad = set(self.tables) - set(TABLES)
            if bad:
                raise ValidationError(f"unknown tables {sorted(bad)}")


_SECTIONS = {"preprocessing": PreprocessConfig, "circles": CirclesConfig, "signing": SigningConfig,
             "analysis": AnalysisConfig, "topics": TopicsConfig}


def load_config(path: Optional[Path], out: Path, **top: Any) -> PipelineConfig:
    """Build a PipelineConfig from an optional TOML file; keyword arguments
    override top-level keys."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ValidationError(f"{path}: {exc}") from None
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            allowed = {f.name for f in fields(cls)}
            unknown = set(value) - allowed
            if unknown:
                raise ValidationError(f"unknown keys in [{key}]: {sorted(unknown)}")
            kwargs[key] = cls(**value)
        elif key in ("seed", "jobs", "datasets", "tables"):
            kwargs[key] = value
        elif key == "data":
            kwargs[key] = Path(value)
        else:
            raise ValidationError(f"unknown config key {key!r}")
    kwargs.update({k: v for k, v in top.items() if v is not None})
    return PipelineConfig(out=Path(out), **kwargs)


def override(cfg: PipelineConfig, section: str, **values: Any) -> PipelineConfig:
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    return replace(cfg, **{section: replace(getattr(cfg, section), **values)})


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag escaping pipeline errors with the stage they came from."""
    try:
        yield
    except SenmError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


# -- helpers ------------------------------------------------------------------

def pmap(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _stage_dir(out: Path, name: str) -> Path:
    return Path(out) / "stages" / name


def _write_jsonl(path: Path, kind: str, dataset: str, rows: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"format": f"senm.{kind}", "version": FORMAT_VERSION, "dataset": dataset}) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path, kind: str) -> list[dict]:
    if not path.is_file():
        raise ValidationError(f"missing stage output {path}; run the earlier stage first")
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != f"senm.{kind}" or header.get("version") != FORMAT_VERSION:
            raise ValidationError(f"{path}: expected senm.{kind} v{FORMAT_VERSION}")
        return [json.loads(line) for line in fh if line.strip()]


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(x: Optional[float], digits: int = 4) -> str:
    if x is None or x != x:
        return ""
    return f"{x:.{digits}f}"


# -- per-ego workers (module level so they pickle) ---------------------------

def _preprocess_one(args: tuple[EgoTimeline, PreprocessConfig]) -> dict:
    timeline, config = args
    label, verdict = evaluate_ego(timeline, make_classifier(config), config)
    aggs = aggregate_relationships(timeline, config)
    _, active = split_full_active(aggs, config.active_threshold)
    return {
        "ego_id": timeline.ego_id,
        "label": label,
        "kept": verdict.kept,
        "reasons": verdict.reasons,
        "location": timeline.declared_location,
        "aggregates": [[a.alter_id, a.interaction_count, a.first_ts, a.last_ts,
                        a.annualized_frequency, a.text_interactions] for a in aggs],
        "active": [a.alter_id for a in active],
    }


def _aggregates(row: dict) -> list[RelationshipAggregate]:
    return [RelationshipAggregate(row["ego_id"], a, n, f, l, q, t) for a, n, f, l, q, t in row["aggregates"]]


def _circles_one(args: tuple[dict, CirclesConfig]) -> dict:
    row, config = args
    active = set(row["active"])
    circ = compute_circles([a for a in _aggregates(row) if a.alter_id in active], config)
    if circ is None:
        return {"ego_id": row["ego_id"], "degenerate": True}
    return {"ego_id": row["ego_id"], "degenerate": False, "optimum_circles": circ.optimum_circles,
            "cluster_means": circ.cluster_means, "membership": circ.membership,
            "nested_sizes": circ.nested_sizes}


def _sign_one(args: tuple) -> dict:
    timeline, row, provider, alt_provider, threshold = args
    aggs = _aggregates(row)
    diag = SigningDiagnostics()
    signed = sign_relationships(timeline, aggs, provider, threshold, diag)
    out = {"ego_id": row["ego_id"], "labeled": diag.labeled, "missing": diag.missing,
           "signed": [[r.alter_id, r.labeled_count, r.negative_count, r.sign] for r in signed],
           "alt": None}
    if alt_provider is not None:
        alt = sign_relationships(timeline, aggs, alt_provider, threshold)
        out["alt"] = [[r.alter_id, r.labeled_count, r.negative_count, r.sign] for r in alt]
    return out


# -- workspace ----------------------------------------------------------------

class Workspace:
    """Runs stages for one PipelineConfig, caching what earlier stages loaded."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out = Path(config.out)
        self._timelines: dict[str, list[EgoTimeline]] = {}
        self._data_dir: Optional[Path] = Path(config.data) if config.data else None

    # datasets and timelines
    def source_datasets(self) -> dict[str, Path]:
        if self.config.data is None:
            raise ValidationError("--data is required for ingest")
        found = read_manifest(self.config.data)
        return self._filter(found)

    def _filter(self, names: dict) -> dict:
        if not self.config.datasets:
            return names
        missing = set(self.config.datasets) - set(names)
        if missing:
            raise ValidationError(f"unknown datasets {sorted(missing)}")
        return {k: v for k, v in names.items() if k in self.config.datasets}

    def dataset_names(self) -> list[str]:
        return list(self._filter(read_manifest(_stage_dir(self.out, "ingest") / "datasets.csv")))

    def data_dir(self) -> Optional[Path]:
        if self._data_dir is None:
            src = _stage_dir(self.out, "ingest") / "source.json"
            if src.is_file():
                self._data_dir = Path(json.loads(src.read_text(encoding="utf-8"))["data"])
        return self._data_dir

    def timelines(self, name: str) -> list[EgoTimeline]:
        if name not in self._timelines:
            directory = _stage_dir(self.out, "ingest") / name
            paths = timeline_paths(directory)
            self._timelines[name] = pmap(read_timeline, paths, self.config.jobs)
        return self._timelines[name]

    def _data_file(self, explicit: Optional[str], default_name: str) -> Optional[str]:
        if explicit:
            return explicit
        d = self.data_dir()
        if d is not None:
            p = Path(d) / default_name if Path(d).is_dir() else Path(d).parent / default_name
            if p.is_file():
                return str(p)
        return None

    def resolved(self) -> PipelineConfig:
        """Config with data-directory defaults filled in (lexicon, labelmap, locations)."""
        cfg = self.config
        lex = self._data_file(cfg.signing.lexicon_path, "lexicon.csv")
        cfg = override(cfg, "signing", lexicon_path=lex)
        cfg = override(cfg, "topics", labelmap_path=self._data_file(cfg.topics.labelmap_path, "labelmap.csv"))
        cfg = override(cfg, "analysis", locations_path=self._data_file(cfg.analysis.locations_path, "locations.csv"))
        return cfg

    # stages
    def ingest(self) -> None:
        with stage("ingest"):
            sources = self.source_datasets()
            base = _stage_dir(self.out, "ingest")
            base.mkdir(parents=True, exist_ok=True)
            for name, directory in sources.items():
                paths = timeline_paths(directory)
                timelines = pmap(read_timeline, paths, self.config.jobs)
                target = base / name
                target.mkdir(exist_ok=True)
                for old in target.glob("*.jsonl"):
                    old.unlink()
                for t in timelines:
                    write_timeline(t, target / f"{t.ego_id}.jsonl")
                self._timelines[name] = timelines
                skipped = sum(t.skipped_unknown_kind for t in timelines)
                dups = sum(t.duplicates_dropped for t in timelines)
                log.info("ingest %s: %d egos, %d unknown-kind records skipped, %d duplicates dropped",
                         name, len(timelines), skipped, dups)
            write_manifest({n: n for n in sources}, base / "datasets.csv")
            data = Path(self.config.data).resolve()
            (base / "source.json").write_text(json.dumps({"data": str(data)}) + "\n", encoding="utf-8")

    def preprocess(self) -> None:
        with stage("preprocess"):
            cfg = self.config.preprocessing
            for name in self.dataset_names():
                rows = pmap(_preprocess_one, [(t, cfg) for t in self.timelines(name)], self.config.jobs)
                _write_jsonl(_stage_dir(self.out, "preprocess") / f"{name}.jsonl", "preprocess", name, rows)

    def circles(self) -> None:
        with stage("circles"):
            cfg = self.config.circles
            for name in self.dataset_names():
                pre = _read_jsonl(_stage_dir(self.out, "preprocess") / f"{name}.jsonl", "preprocess")
                rows = pmap(_circles_one, [(r, cfg) for r in pre if r["kept"]], self.config.jobs)
                _write_jsonl(_stage_dir(self.out, "circles") / f"{name}.jsonl", "circles", name, rows)

    def providers(self):
        sc = self.resolved().signing
        sc.validate()

        def build(kind: str):
            if kind == "precomputed":
                return PrecomputedProvider.from_csv(sc.sidecar_path) if sc.sidecar_path else PrecomputedProvider()
            return LexiconProvider.from_path(sc.lexicon_path, tau=sc.tau)

        primary = build(sc.provider)
        if sc.compare == "none":
            alt = None
        elif sc.compare == "shifted":
            alt = ShiftedProvider(primary, sc.shift_probability, seed=self.config.seed)
        else:
            alt = build(sc.compare)
        return primary, alt

    def sign(self) -> None:
        with stage("sign"):
            primary, alt = self.providers()
            threshold = self.config.signing.threshold
            for name in self.dataset_names():
                pre = _read_jsonl(_stage_dir(self.out, "preprocess") / f"{name}.jsonl", "preprocess")
                by_id = {t.ego_id: t for t in self.timelines(name)}
                work = [(by_id[r["ego_id"]], r, primary, alt, threshold) for r in pre if r["label"] == "person"]
                rows = pmap(_sign_one, work, self.config.jobs)
                missing = sum(r["missing"] for r in rows)
                if missing:
                    log.warning("sign %s: %d interactions had no text or label", name, missing)
                _write_jsonl(_stage_dir(self.out, "sign") / f"{name}.jsonl", "sign", name, rows)

    def results(self, name: str) -> list[analysis.EgoResult]:
        """Join preprocess, circles and sign outputs into EgoResults."""
        pre = _read_jsonl(_stage_dir(self.out, "preprocess") / f"{name}.jsonl", "preprocess")
        circ = {r["ego_id"]: r for r in _read_jsonl(_stage_dir(self.out, "circles") / f"{name}.jsonl", "circles")}
        sign = {r["ego_id"]: r for r in _read_jsonl(_stage_dir(self.out, "sign") / f"{name}.jsonl", "sign")}
        out = []
        for row in pre:
            eid = row["ego_id"]
            c = circ.get(eid)
            circles = None
            if c is not None and not c["degenerate"]:
                circles = CircleStructure(eid, c["optimum_circles"], c["cluster_means"],
                                          c["membership"], c["nested_sizes"])
            s = sign.get(eid)

            def rels(items):
                return [SignedRelationship(eid, a, lab, neg, sg) for a, lab, neg, sg in items]

            out.append(analysis.EgoResult(
                ego_id=eid,
                label=row["label"],
                verdict=ActivityVerdict(eid, row["kept"], list(row["reasons"])),
                aggregates=_aggregates(row),
                active=frozenset(row["active"]),
                signed=rels(s["signed"]) if s else [],
                circles=circles,
                alt_signed=rels(s["alt"]) if s and s["alt"] is not None else None,
                location=row["location"],
            ))
        return out

    def analyze(self) -> dict[str, analysis.DatasetReport]:
        with stage("analyze"):
            cfg = self.resolved()
            ac = cfg.analysis
            primary, alt = self.providers()
            names = (primary.name, alt.name) if alt is not None else None
            reports = {}
            location_rows: dict[str, tuple] = {}
            mapping = analysis.load_location_map(ac.locations_path) if ac.locations_path else {}
            for name in self.dataset_names():
                egos = self.results(name)
                reports[name] = analysis.build_report(name, egos, ac.circles_filter, ac.per_ego_averaging, names)
                for problem in reports[name].problems:
                    log.warning("analyze %s: %s", name, problem)
                kept = [(e.location, len(e.active)) for e in egos if e.kept]
                location_rows[name] = analysis.aggregate_by_location(kept, mapping, ac.min_country_egos)
            write_tables(self.out, reports, location_rows, ac.circles_filter, self.config.tables, primary.name)
            return reports

    def topics(self) -> None:
        with stage("topics"):
            tc = self.resolved().topics
            labelmap = topics.load_labelmap(tc.labelmap_path) if tc.labelmap_path else topics.default_labelmap()
            stop = topics.Stopwords.load(Path(tc.stopwords_dir) if tc.stopwords_dir else None)
            ranked: dict[tuple[str, str], dict[str, list]] = {}
            active_tags: dict[str, list] = {}
            negativity: dict[str, float] = {}
            for name in self.dataset_names():
                egos = {e.ego_id: e for e in self.results(name)}
                full_recs, active_recs = [], []
                for t in self.timelines(name):
                    e = egos[t.ego_id]
                    if not e.is_person:
                        continue
                    full_recs.extend(t.records)
                    if e.kept:
                        active_recs.extend(r for r in t.records if any(a in e.active for a in r.alter_ids))
                for kind in ("hashtag", "word"):
                    for scope, recs in (("full", full_recs), ("active", active_recs)):
                        terms = topics.top_k_terms(recs, kind, tc.k, stop)
                        if kind == "hashtag":
                            terms = topics.assign_topic_labels(terms, labelmap)
                        ranked.setdefault((kind, scope), {})[name] = terms
                active_tags[name] = ranked[("hashtag", "active")][name]
                try:
                    negativity[name] = analysis.negativity_percentage(analysis.active_scope(egos.values()))
                except SenmError as exc:
                    log.warning("topics %s: %s", name, exc)
            write_topic_tables(self.out, ranked, active_tags, negativity)

    def run(self, which: Sequence[str]) -> None:
        for name in which:
            getattr(self, name)()


# -- report writers -----------------------------------------------------------

def write_tables(out: Path, reports: dict[str, analysis.DatasetReport], locations: dict[str, tuple],
                 k: int, tables: Optional[Sequence[str]] = None, provider: str = "") -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    want = set(tables or TABLES)
    reps = list(reports.values())
    if "2" in want:
        rows = []
        for r in reps:
            if r.provider_drift:
                for d in r.provider_drift:
                    rows.append([r.dataset, d.provider, _fmt(d.full), _fmt(d.active), _fmt(d.delta)])
            else:
                rows.append([r.dataset, provider, _fmt(r.full_negativity), _fmt(r.active_negativity),
                             _fmt(r.delta)])
        _write_csv(out / "table2.csv", ["dataset", "provider", "full", "active", "difference"], rows)
    if "3" in want:
        _write_csv(out / "table3.csv", ["dataset", "full", "active", "difference"],
                   [[r.dataset, _fmt(r.full_negativity), _fmt(r.active_negativity), _fmt(r.delta)] for r in reps])
    if "4" in want:
        rows = []
        for r in reps:
            for scope, d in (("full", r.full), ("active", r.active)):
                rows.append([r.dataset, scope, d.egos, d.relationships, d.interactions])
        _write_csv(out / "table4.csv", ["dataset", "network", "egos", "relationships", "interactions"], rows)
    if "5" in want:
        rows = []
        for r in reps:
            c = r.circle_counts
            rows.append([r.dataset, _fmt(c.mean if c else None), _fmt(c.ci_low if c else None),
                         _fmt(c.ci_high if c else None), c.n if c else 0, r.egos_with_k_circles,
                         r.degenerate_egos])
        _write_csv(out / "table5.csv", ["dataset", "mean_circles", "ci_low", "ci_high", "egos",
                                        f"egos_with_{k}_circles", "degenerate_egos"], rows)
    if "6" in want:
        rows = [[r.dataset] + [_fmt(v) for v in (r.mean_circle_sizes or [None] * k)] for r in reps]
        _write_csv(out / "table6.csv", ["dataset"] + [f"C{i + 1}" for i in range(k)], rows)
    if "7" in want:
        header = ["dataset"]
        for i in range(k):
            header += [f"C{i + 1}_mean_negative", f"C{i + 1}_percent"]
        header.append("active")
        rows = []
        for r in reps:
            cells = [r.dataset]
            for c in r.per_circle_negativity or [None] * k:
                cells += [_fmt(c.mean_negative if c else None), _fmt(c.percentage if c else None)]
            cells.append(_fmt(r.active_negativity))
            rows.append(cells)
        _write_csv(out / "table7.csv", header, rows)
    if "locations" in want:
        rows = []
        for name, (countries, continents) in locations.items():
            rows += [[name, "country", x.name, x.egos, x.relationships] for x in countries]
            rows += [[name, "continent", x.name, x.egos, x.relationships] for x in continents]
        _write_csv(out / "locations.csv", ["dataset", "level", "name", "egos", "relationships"], rows)

    def clean(obj):
        if isinstance(obj, float):
            return None if obj != obj else round(obj, 10)
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    combined = {"format": "senm.report", "version": FORMAT_VERSION,
                "datasets": {r.dataset: clean({**asdict(r), "delta": r.delta}) for r in reps}}
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(combined, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_topic_tables(out: Path, ranked: dict, active_tags: dict, negativity: dict) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for (kind, scope), per_ds in sorted(ranked.items()):
        plural = "hashtags" if kind == "hashtag" else "words"
        rows = [[ds, t.rank, t.term, t.mentions, t.topic or ""] for ds, terms in per_ds.items() for t in terms]
        _write_csv(out / f"top20_{plural}_{scope}.csv", ["dataset", "rank", "term", "mentions", "topic"], rows)
    features = topics.topic_negativity_features({n: active_tags[n] for n in negativity})
    rows = []
    for ds, per_topic in features.items():
        for topic, (count, mentions, prop) in per_topic.items():
            rows.append([ds, topic, count, mentions, _fmt(prop, 6), _fmt(negativity[ds])])
    _write_csv(out / "topic_features.csv", ["dataset", "topic", "count", "mentions", "proportion",
                                            "active_negativity"], rows)
    results = topics.correlate_features(features, negativity) if len(negativity) >= 3 else []
    if len(negativity) < 3:
        log.warning("topics: need at least 3 datasets for correlations, have %d", len(negativity))
    _write_csv(out / "correlations.csv", ["feature", "r", "df", "p_two_tailed"],
               [[c.feature, _fmt(c.r, 6), c.df, _fmt(c.p_two_tailed, 6)] for c in results])
