"""Synthetic ego timelines with planted circles, signs and hashtags.

Every relationship gets ``round(f * D)`` interactions, where ``f`` is its
planted (noisy) frequency and ``D`` the time from its first interaction to the
ego's last post, so the measured annualized frequency tracks the plant. The
truth manifest records what was emitted and is the oracle for the pipeline.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InfeasibleConfig, ValidationError
from .ingestion import EgoTimeline, InteractionRecord, write_manifest, write_timeline
from .preprocessing import DAY, YEAR
from .signing import DEFAULT_THRESHOLD
from .topics import TOPICS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_LEVELS = ((1.5, 162.0), (5.0, 54.0), (15.0, 18.0), (45.0, 6.0), (135.0, 2.0))
KIND_WEIGHTS = (("reply", 0.6), ("mention", 0.3), ("quote", 0.1))

NEGATIVE_WORDS = ("awful", "terrible", "horrible", "disgusting")
POSITIVE_WORDS = ("great", "lovely", "wonderful", "brilliant")
NEUTRAL_WORDS = ("today", "tonight", "update", "schedule")
FILLER_WORDS = ("watching", "thinking", "match", "people", "weekend", "tomorrow", "show", "season")

_GENERAL_TERMS = (
    "music", "football", "weekend", "photography", "sunsets", "travel", "foodie", "gaming",
    "fitness", "movies", "bookclub", "fashion", "nature", "coffee", "artwork", "running",
    "concert", "recipes", "throwback", "motivation", "petsofinstagram", "garden", "basketball",
    "memes", "streaming", "realitytv", "gfvip", "bbb22", "xfactorbr", "ikvertrek",
)
_SPECIFIC_TERMS = (
    ("election", "political"), ("brexit", "political"), ("parliament", "political"),
    ("government", "political"), ("politics", "political"), ("vote", "political"),
    ("covid19", "covid"), ("lockdown", "covid"), ("vaccine", "covid"), ("coronavirus", "covid"),
    ("climatechange", "climate"), ("netzero", "climate"), ("renewables", "climate"),
    ("breakingnews", "news"), ("news", "news"), ("noticias", "news"), ("nieuws", "news"),
    ("ramadan", "religious"), ("prayer", "religious"), ("allah", "religious"),
)


def term_universe_preset(name: str, zipf: float = 1.0) -> list[tuple[str, str, float]]:
    """Built-in term universes: ``general`` is dominated by general-topic
    hashtags, ``specific`` by political/news/covid/climate/religious ones."""
    general = [(t, "general") for t in _GENERAL_TERMS]
    specific = list(_SPECIFIC_TERMS)
    if name == "general":
        ordered = general[:18] + specific[:4] + general[18:] + specific[4:]
    elif name == "specific":
        ordered = specific[:12] + general[:8] + specific[12:] + general[8:]
    elif name == "mixed":
        ordered = [x for pair in zip(general, specific) for x in pair] + general[len(specific):]
    else:
        raise ValidationError(f"unknown term universe preset {name!r}")
    return [(term, topic, 1.0 / (rank + 1) ** zipf) for rank, (term, topic) in enumerate(ordered)]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "synthetic"
    ego_count: int = 50
    circle_levels: tuple = DEFAULT_LEVELS  # (target cumulative size, frequency per year)
    frequency_noise: float = 0.15
    negativity_by_level: tuple = (0.8, 0.7, 0.6, 0.5, 0.4)
    inactive_fraction: float = 0.3
    inactive_negativity: float = 0.2
    inactive_frequency: tuple = (0.3, 0.9)
    neutral_share: float = 0.35
    sign_margin: float = 0.03
    window_days: float = 730.0
    start_spread: float = 0.25  # relationships start within this share of the window
    start_ts: int = 1609459200  # 2021-01-01T00:00:00Z
    min_total_posts: int = 2200
    hashtag_rate: float = 0.3
    term_universe: tuple = ()
    zipf_exponent: float = 1.0
    universe_preset: str = "general"
    locations: tuple = ()  # (location, country, continent, weight)
    bot_fraction: float = 0.0
    inactive_ego_fraction: float = 0.0
    emit_text: bool = False
    seed: int = 1

    def levels(self) -> list[tuple[float, float]]:
        return [(float(c), float(f)) for c, f in self.circle_levels]

    def terms(self) -> list[tuple[str, str, float]]:
        if self.term_universe:
            return [(str(t), str(tp), float(w)) for t, tp, w in self.term_universe]
        return term_universe_preset(self.universe_preset, self.zipf_exponent)

    def validate(self) -> None:
        lv = self.levels()
        if not lv:
            raise ValidationError("circle_levels must not be empty")
        if self.ego_count < 1:
            raise ValidationError("ego_count must be positive")
        sizes = [c for c, _ in lv]
        freqs = [f for _, f in lv]
        if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] <= 0:
            raise ValidationError("cumulative circle sizes must be positive and strictly increasing")
        if any(b >= a for a, b in zip(freqs, freqs[1:])):
            raise ValidationError("level frequencies must be strictly decreasing")
        if len(self.negativity_by_level) != len(lv):
            raise ValidationError("negativity_by_level needs one entry per level")
        fracs = list(self.negativity_by_level) + [self.inactive_negativity, self.inactive_fraction,
                                                  self.neutral_share, self.hashtag_rate,
                                                  self.bot_fraction, self.inactive_ego_fraction]
        if any(not 0.0 <= p <= 1.0 for p in fracs):
            raise ValidationError("fractions must lie in [0, 1]")
        if self.inactive_fraction >= 1.0:
            raise ValidationError("inactive_fraction must be below 1")
        if self.frequency_noise < 0:
            raise ValidationError("frequency_noise must be non-negative")
        lo, hi = self.inactive_frequency
        if not 0 < lo <= hi < 1:
            raise ValidationError("inactive_frequency must lie inside (0, 1)")
        if self.window_days * (1 - self.start_spread) <= YEAR / DAY:
            raise ValidationError("relationships must span more than a year; widen window_days")
        if not DEFAULT_THRESHOLD + self.sign_margin < 1 or DEFAULT_THRESHOLD - self.sign_margin < 0:
            raise ValidationError("sign_margin too large")
        for t, topic, w in self.terms():
            if topic not in TOPICS or w <= 0:
                raise ValidationError(f"bad term universe entry {(t, topic, w)!r}")
        if self.frequency_noise > 0:
            # adjacent levels must stay apart; the lowest must stay above one per year
            gaps = [math.log(a / b) / 2 for a, b in zip(freqs, freqs[1:])] + [math.log(freqs[-1])]
            worst = min(gaps)
            p = float(stats.norm.sf(worst / self.frequency_noise)) if worst > 0 else 1.0
            if p > 0.01:
                raise InfeasibleConfig(
                    f"frequency noise {self.frequency_noise} blurs adjacent levels (overlap p={p:.3g})")
        elif freqs[-1] < 1.0:
            raise InfeasibleConfig("lowest level must be at least one interaction per year")


# -- planning -----------------------------------------------------------------

@dataclass
class _EgoPlan:
    index: int
    ego_id: str
    person: bool
    inactive: bool
    ring_sizes: list[int]
    inactive_count: int
    negative: list[list[bool]] = field(default_factory=list)  # per ring, then inactive last
    location: Optional[str] = None


def _stochastic_round(rng: np.random.Generator, x: float) -> int:
    base = math.floor(x)
    return base + int(rng.random() < x - base)


def _plan(config: ScenarioConfig, ds_index: int) -> list[_EgoPlan]:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, ds_index, 0xD5]))
    levels = config.levels()
    rings = [c - p for (c, _), p in zip(levels, [0.0] + [c for c, _ in levels[:-1]])]
    locs = list(config.locations)
    loc_w = np.array([float(l[3]) for l in locs]) if locs else None
    plans = []
    for i in range(config.ego_count):
        ego_id = f"{config.name}_{i:04d}"
        u = rng.random()
        person = u >= config.bot_fraction
        inactive = person and u < config.bot_fraction + config.inactive_ego_fraction
        sizes = [max(1, _stochastic_round(rng, r)) for r in rings]
        n_active = sum(sizes)
        frac = config.inactive_fraction
        inactive_count = _stochastic_round(rng, n_active * frac / (1 - frac)) if frac else 0
        location = None
        if locs:
            location = str(locs[int(rng.choice(len(locs), p=loc_w / loc_w.sum()))][0])
        plans.append(_EgoPlan(i, ego_id, person, inactive, sizes, inactive_count, location=location))

    # signs by quota: each level realizes its planted share exactly
    groups = list(range(len(levels))) + ["inactive"]
    shares = list(config.negativity_by_level) + [config.inactive_negativity]
    for g, share in zip(groups, shares):
        sizes = [0 if not p.person else p.ring_sizes[g] if g != "inactive" else p.inactive_count
                 for p in plans]
        flags = np.zeros(sum(sizes), dtype=bool)
        flags[: int(round(share * flags.size))] = True
        rng.shuffle(flags)
        it = iter(flags.tolist())
        for p, n in zip(plans, sizes):
            p.negative.append([next(it) for _ in range(n)])
    return plans


# -- per-ego emission ---------------------------------------------------------

def _unique_times(rng: np.random.Generator, lo: int, hi: int, n: int) -> np.ndarray:
    """n distinct integer seconds in [lo, hi]."""
    n = min(n, hi - lo + 1)
    out = np.unique(rng.integers(lo, hi + 1, size=n))
    while out.size < n:
        extra = rng.integers(lo, hi + 1, size=n - out.size)
        out = np.unique(np.concatenate([out, extra]))
    return out


def _label_counts(rng: np.random.Generator, n: int, negative: bool, margin: float) -> int:
    """Negative label count on the planted side of the threshold with margin."""
    lo_neg = math.ceil(round((DEFAULT_THRESHOLD + margin) * n, 9))
    hi_pos = math.floor(round((DEFAULT_THRESHOLD - margin) * n, 9))
    if negative:
        top = max(lo_neg, math.ceil(0.6 * n))
        return int(rng.integers(lo_neg, top + 1))
    return int(rng.integers(0, hi_pos + 1))


def _largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    w = np.asarray(weights, dtype=float)
    exact = total * w / w.sum()
    base = np.floor(exact).astype(int)
    rest = total - int(base.sum())
    order = sorted(range(len(w)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return base.tolist()


def _emit_ego(config: ScenarioConfig, ds_index: int, plan: _EgoPlan) -> tuple[EgoTimeline, dict]:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, ds_index, plan.index + 1]))
    start = int(config.start_ts)
    window = int(config.window_days * DAY)
    end = start + window - 1
    levels = config.levels()
    kinds = [k for k, _ in KIND_WEIGHTS]
    kind_p = np.array([w for _, w in KIND_WEIGHTS])

    alters: dict[str, dict] = {}
    events: list[tuple[int, str, str]] = []  # (ts, alter, label)

    def add_relationship(alter: str, level: int, freq: float, negative: bool) -> None:
        s = start + int(rng.random() * config.start_spread * window)
        years = (end - s) / YEAR
        if level >= 0:
            n = max(1, int(round(freq * years)))
            # move the start so that n / duration hits the planted frequency
            s = max(start, end - int(round(n / freq * YEAR)))
            years = (end - s) / YEAR
        else:
            n = max(1, int(math.floor(freq * years)))
        times = np.concatenate(([s], _unique_times(rng, s + 1, end, n - 1))) if n > 1 else np.array([s])
        n = times.size
        k = _label_counts(rng, n, negative, config.sign_margin)
        labels = np.array(["negative"] * k + ["neutral"] * (n - k), dtype=object)
        nonneg = labels != "negative"
        labels[nonneg] = np.where(rng.random(int(nonneg.sum())) < config.neutral_share, "neutral", "positive")
        rng.shuffle(labels)
        for ts, lab in zip(times.tolist(), labels.tolist()):
            events.append((int(ts), alter, lab))
        realized = n / max(years, 1.0 / 12.0)
        alters[alter] = {"level": level, "sign": "negative" if negative else "positive",
                         "frequency": realized, "interactions": n, "negatives": k,
                         "active": realized >= 1.0}

    j = 0
    if plan.person:
        for lvl, ((_, base), size) in enumerate(zip(levels, plan.ring_sizes)):
            noise = rng.standard_normal(size) * config.frequency_noise
            for m in range(size):
                add_relationship(f"a{j:04d}", lvl, base * math.exp(noise[m]), plan.negative[lvl][m])
                j += 1
        lo, hi = config.inactive_frequency
        for m in range(plan.inactive_count):
            add_relationship(f"a{j:04d}", -1, float(rng.uniform(lo, hi)), plan.negative[-1][m])
            j += 1
    else:
        # automated account: a handful of contacts drowned in broadcast posts
        for m in range(5):
            add_relationship(f"a{j:04d}", -1, 2.0, bool(rng.random() < 0.5))
            j += 1

    events.sort()
    n_inter = len(events)
    months = int(math.ceil(config.window_days / 30.0)) + 1
    if plan.person:
        n_plain = max(15 * months, config.min_total_posts - n_inter)
    else:
        n_plain = max(3000, 200 * n_inter)
    grid = start + (np.arange(n_plain) + rng.random(n_plain)) * (window / n_plain)
    plain = np.clip(grid.astype(np.int64), start, end)
    plain[0], plain[-1] = start, end
    plain_ts = sorted(int(t) for t in plain)

    if plan.inactive:
        # squeeze the ego's whole history into its first ~four months
        days = int(config.window_days)
        events = [(start + (t - start) * 120 // days, a, lab) for t, a, lab in events]
        plain_ts = [start + (t - start) * 120 // days for t in plain_ts]

    terms = config.terms()
    n_tags = int(round(config.hashtag_rate * n_inter))
    tag_counts = _largest_remainder(n_tags, [w for _, _, w in terms]) if n_tags and terms else []
    tags: list[Optional[str]] = [None] * n_inter
    if n_tags:
        pool = [t for (t, _, _), c in zip(terms, tag_counts) for _ in range(c)]
        rng.shuffle(pool)
        slots = rng.choice(n_inter, size=n_tags, replace=False)
        for slot, term in zip(slots.tolist(), pool):
            tags[slot] = term

    kind_draw = rng.choice(len(kinds), size=n_inter, p=kind_p)
    case_draw = rng.integers(0, 3, size=n_inter)
    word_draw = rng.integers(0, 4, size=n_inter)
    filler_draw = rng.integers(0, len(FILLER_WORDS), size=n_inter)
    records = []
    tag_truth: dict[str, dict[str, int]] = {}
    for i, (ts, alter, lab) in enumerate(events):
        tag = tags[i]
        shown = None
        if tag is not None:
            shown = (tag, tag.upper(), tag.capitalize())[int(case_draw[i])]
            slot = tag_truth.setdefault(alter, {})
            slot[tag] = slot.get(tag, 0) + 1
        text = lang = None
        if config.emit_text:
            words = {"negative": NEGATIVE_WORDS, "positive": POSITIVE_WORDS, "neutral": NEUTRAL_WORDS}[lab]
            text = f"{words[int(word_draw[i])]} {FILLER_WORDS[int(filler_draw[i])]}"
            if shown:
                text += f" #{shown}"
            lang = "en"
        records.append(InteractionRecord(
            ego_id=plan.ego_id, alter_ids=(alter,), timestamp=ts, kind=kinds[int(kind_draw[i])],
            text=text, lang=lang, sentiment=lab, hashtags=(shown,) if shown else (),
        ))
    records.sort(key=lambda r: (r.timestamp, r.kind, r.alter_ids, r.text or ""))
    stamps = [r.timestamp for r in records] + plain_ts
    timeline = EgoTimeline(
        ego_id=plan.ego_id,
        records=records,
        noncommunicative_post_count=len(plain_ts),
        declared_location=plan.location,
        first_activity=min(stamps),
        last_activity=max(stamps),
        noncommunicative_ts=plain_ts,
    )
    truth = {
        "person": plan.person,
        "kept": plan.person and not plan.inactive,
        "optimum_circles": len(plan.ring_sizes) if plan.person else 0,
        "ring_sizes": plan.ring_sizes if plan.person else [],
        "nested_sizes": np.cumsum(plan.ring_sizes).tolist() if plan.person else [],
        "location": plan.location,
        "alters": alters,
        "hashtags": tag_truth,
    }
    return timeline, truth


# -- dataset level ------------------------------------------------------------

def _pct(neg: int, total: int) -> Optional[float]:
    return 100.0 * neg / total if total else None


def _summarize(config: ScenarioConfig, egos: dict[str, dict], k_top: int = 20) -> dict:
    n_levels = len(config.levels())
    full_neg = full_tot = act_neg = act_tot = 0
    ring_neg = [0] * n_levels
    ring_tot = [0] * n_levels
    active_rel = all_rel = 0
    tags_full: dict[str, int] = {}
    tags_active: dict[str, int] = {}
    for ego in egos.values():
        if not ego["person"]:
            continue
        for alter, a in ego["alters"].items():
            neg = a["sign"] == "negative"
            full_neg += neg
            full_tot += 1
            all_rel += 1
            active_rel += a["active"]
            for t, c in ego["hashtags"].get(alter, {}).items():
                tags_full[t] = tags_full.get(t, 0) + c
                if ego["kept"] and a["active"]:
                    tags_active[t] = tags_active.get(t, 0) + c
            if ego["kept"] and a["active"]:
                act_neg += neg
                act_tot += 1
            if ego["kept"] and a["level"] >= 0:
                ring_neg[a["level"]] += neg
                ring_tot[a["level"]] += 1
    nested = [_pct(sum(ring_neg[: i + 1]), sum(ring_tot[: i + 1])) for i in range(n_levels)]

    def top(counts: dict) -> list:
        return [[t, c] for t, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k_top]]

    return {
        "full_negativity": _pct(full_neg, full_tot),
        "active_negativity": _pct(act_neg, act_tot),
        "active_fraction": active_rel / all_rel if all_rel else None,
        "level_negativity": [_pct(n, t) for n, t in zip(ring_neg, ring_tot)],
        "circle_negativity": nested,
        "top_hashtags": {"full": top(tags_full), "active": top(tags_active)},
        "topics": {t: tp for t, tp, _ in config.terms()},
    }


def generate_dataset(config: ScenarioConfig, ds_index: int = 0, jobs: int = 1) -> tuple[list[EgoTimeline], dict]:
    """Timelines (sorted by ego id) plus the truth manifest for one dataset."""
    config.validate()
    plans = _plan(config, ds_index)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_emit_ego, [config] * len(plans), [ds_index] * len(plans), plans,
                                    chunksize=max(1, len(plans) // (4 * jobs))))
    else:
        results = [_emit_ego(config, ds_index, p) for p in plans]
    timelines = [t for t, _ in results]
    egos = {t.ego_id: truth for t, truth in results}
    manifest = {"name": config.name, "config": _config_to_json(config), "egos": egos}
    manifest.update(_summarize(config, egos))
    return timelines, manifest


def _config_to_json(config: ScenarioConfig) -> dict:
    return json.loads(json.dumps(asdict(config)))


# -- scenario files -----------------------------------------------------------

_FIELDS = {f.name for f in fields(ScenarioConfig)}
_TUPLE_FIELDS = {"circle_levels", "negativity_by_level", "inactive_frequency", "term_universe", "locations"}


def _coerce(raw: dict, where: str) -> dict:
    unknown = set(raw) - _FIELDS
    if unknown:
        raise ValidationError(f"{where}: unknown scenario keys {sorted(unknown)}")
    out = dict(raw)
    for key in _TUPLE_FIELDS & set(out):
        out[key] = tuple(tuple(v) if isinstance(v, list) else v for v in out[key])
    return out


def load_scenario(path, seed: Optional[int] = None) -> list[ScenarioConfig]:
    """Read a TOML scenario: top-level ``seed``, a ``[defaults]`` table and one
    ``[[datasets]]`` table per dataset (each needs a ``name``)."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"scenario file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    return scenario_from_dict(raw, seed, str(path))


def scenario_from_dict(raw: dict, seed: Optional[int] = None, where: str = "scenario") -> list[ScenarioConfig]:
    base_seed = int(raw.get("seed", 1) if seed is None else seed)
    defaults = _coerce(raw.get("defaults", {}), where)
    sets = raw.get("datasets") or [{"name": "synthetic"}]
    configs = []
    for entry in sets:
        merged = {**defaults, **_coerce(entry, where), "seed": base_seed}
        cfg = ScenarioConfig(**merged)
        cfg.validate()
        configs.append(cfg)
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValidationError(f"{where}: dataset names must be unique")
    return configs


def default_scenario_path() -> Path:
    return Path(str(resources.files("senm") / "data" / "scenario_default.toml"))


def simulate(configs: Sequence[ScenarioConfig], out_dir, jobs: int = 1) -> dict:
    """Write every dataset, the dataset manifest, the truth manifest, a topic
    labelmap, a location map and a lexicon into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth: dict[str, Any] = {"format": "senm.truth", "version": 1, "datasets": {}}
    entries = {}
    labelmap: dict[str, str] = {}
    locations: dict[str, tuple[str, str]] = {}
    for i, cfg in enumerate(configs):
        timelines, manifest = generate_dataset(cfg, i, jobs)
        ds_dir = out / cfg.name
        ds_dir.mkdir(exist_ok=True)
        for old in ds_dir.glob("*.jsonl"):
            old.unlink()
        for t in timelines:
            write_timeline(t, ds_dir / f"{t.ego_id}.jsonl")
        entries[cfg.name] = cfg.name
        truth["datasets"][cfg.name] = manifest
        for term, topic, _ in cfg.terms():
            if topic != "general":
                labelmap[term] = topic
        for loc, country, continent, _ in cfg.locations:
            locations[str(loc)] = (str(country), str(continent))
    write_manifest(entries, out / "datasets.csv")
    with open(out / "truth.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "labelmap.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("term,topic\n")
        for term in sorted(labelmap):
            fh.write(f"{term},{labelmap[term]}\n")
    if locations:
        with open(out / "locations.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["location", "country", "continent"])
            for loc in sorted(locations):
                w.writerow([loc, *locations[loc]])
    with open(out / "lexicon.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("token,valence\n")
        for w in NEGATIVE_WORDS:
            fh.write(f"{w},-1\n")
        for w in POSITIVE_WORDS:
            fh.write(f"{w},1\n")
    return truth
