import itertools
import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from senm.errors import ClassifierUnavailable, ValidationError
from senm.preprocessing import (
    YEAR, ExternalLabels, HeuristicClassifier, PreprocessConfig, RelationshipAggregate,
    aggregate_relationships, check_activity, classify_ego, evaluate_ego, make_classifier,
    monthly_post_counts, split_full_active,
)
from senm.simgen import ScenarioConfig, generate_dataset

from conftest import DAY, T0, make_timeline


def _spread(n, start, days):
    return [start + int(i * days * DAY / n) for i in range(n)]


def test_external_labels_passthrough(tmp_path):
    p = tmp_path / "labels.csv"
    p.write_text("ego_id,label\n42,other\n43,person\n", encoding="utf-8")
    t = make_timeline([(T0, ["a"])], ego="42")
    cfg = PreprocessConfig(labels_path=str(p))
    assert classify_ego(t, cfg) == "other"
    assert classify_ego(make_timeline([(T0, ["a"])], ego="43"), make_classifier(cfg)) == "person"
    with pytest.raises(ClassifierUnavailable):
        classify_ego(make_timeline([(T0, ["a"])], ego="44"), cfg)
    with pytest.raises(ValidationError):
        ExternalLabels({"1": "robot"})


def test_heuristic_thresholds():
    clf = HeuristicClassifier()
    # 100,000 posts in 30 days
    t = make_timeline([(T0 + i, ["a"]) for i in range(2000)],
                      plain=_spread(98_000, T0, 30))
    assert clf(t) == "other"
    # 3,000 posts over two years, 40% of them interactions
    inter = [(ts, ["a"]) for ts in _spread(1200, T0, 730)]
    t = make_timeline(inter, plain=[ts + 7 for ts in _spread(1800, T0, 730)])
    assert clf(t) == "person"
    # almost no interactions
    t = make_timeline([(T0, ["a"])], plain=_spread(500, T0 + 10, 200))
    assert clf(t) == "other"


def test_too_few_posts():
    t = make_timeline([(T0, ["a"])], plain=_spread(1998, T0 + 5, 365))
    assert t.total_posts == 1999
    assert "too_few_tweets" in check_activity(t).reasons
    t = make_timeline([(T0, ["a"])], plain=_spread(1999, T0 + 5, 365))
    assert "too_few_tweets" not in check_activity(t).reasons


def test_too_short_span():
    t = make_timeline([(T0, ["a"])], plain=_spread(2499, T0 + 5, 100))
    v = check_activity(t)
    assert not v.kept and "too_short_span" in v.reasons


def _month_start(year, month):
    return int(datetime(year, month, 1, tzinfo=timezone.utc).timestamp())


def test_sparse_months_against_bucket_oracle():
    # 12 calendar months; months 0..6 hold 3 posts each, the rest carry the bulk
    posts = []
    for m in range(12):
        start = _month_start(2021, m + 1)
        n = 3 if m < 7 else (2500 - 21) // 5 + (1 if m - 7 < (2500 - 21) % 5 else 0)
        posts += [start + DAY + i * 60 for i in range(n)]
    t = make_timeline([(posts[0], ["a"])], plain=posts[1:])
    assert t.total_posts == 2500
    # independent oracle: bucket by (year, month) strings
    buckets = {}
    for ts in posts:
        key = datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m")
        buckets[key] = buckets.get(key, 0) + 1
    assert monthly_post_counts(t) == [buckets[k] for k in sorted(buckets)]
    assert sum(1 for v in buckets.values() if v < 10) == 7
    v = check_activity(t)
    assert v.reasons == ["too_sparse_months"]


def test_half_sparse_months_is_kept():
    posts = []
    for m in range(12):
        start = _month_start(2021, m + 1)
        n = 3 if m < 6 else 400
        posts += [start + DAY + i * 60 for i in range(n)]
    t = make_timeline([(posts[0], ["a"])], plain=posts[1:])
    assert check_activity(t).kept


def test_not_person_folded_into_verdict():
    t = make_timeline([(T0, ["a"])], plain=_spread(3000, T0 + 5, 365))
    label, verdict = evaluate_ego(t, HeuristicClassifier(), PreprocessConfig())
    assert label == "other" and verdict.reasons == ["not_person"] and not verdict.kept


def test_frequency_definitions():
    last = T0 + int(YEAR)
    inter = [(T0 + i * int(YEAR) // 12, ["a"]) for i in range(12)] + [(last - 2 * DAY, ["b"])]
    t = make_timeline(inter, plain=[last])
    aggs = {a.alter_id: a for a in aggregate_relationships(t)}
    assert aggs["a"].annualized_frequency == pytest.approx(12.0)
    assert aggs["b"].annualized_frequency == pytest.approx(12.0)  # one-month floor
    assert aggs["a"].interaction_count == 12 and aggs["a"].text_interactions == 0


def test_split_full_active():
    aggs = [RelationshipAggregate("e", f"a{i}", 1, 0, 0, f, 0) for i, f in enumerate([2.0, 1.0, 0.9])]
    full, active = split_full_active(aggs)
    assert [a.annualized_frequency for a in active] == [2.0, 1.0]
    assert full == aggs
    assert split_full_active([]) == ([], [])


def test_planted_frequencies_and_active_fraction():
    cfg = ScenarioConfig(ego_count=30, seed=5)
    timelines, truth = generate_dataset(cfg)
    errors = []
    for t in timelines:
        planted = truth["egos"][t.ego_id]["alters"]
        for a in aggregate_relationships(t):
            errors.append(abs(a.annualized_frequency / planted[a.alter_id]["frequency"] - 1))
    assert max(errors) < 0.01
    rels = [a for t in timelines for a in aggregate_relationships(t)]
    _, active = split_full_active(rels)
    assert len(active) / len(rels) == pytest.approx(0.70, abs=0.02)
    assert len(active) / len(rels) == pytest.approx(truth["active_fraction"], abs=1e-12)


@given(st.lists(st.floats(min_value=0.01, max_value=500), max_size=40),
       st.lists(st.floats(min_value=0.1, max_value=50), min_size=2, max_size=6, unique=True))
def test_active_subset_and_monotone(freqs, thresholds):
    aggs = [RelationshipAggregate("e", f"a{i}", 1, 0, 0, f, 0) for i, f in enumerate(freqs)]
    sizes = []
    for th in sorted(thresholds):
        full, active = split_full_active(aggs, th)
        assert {a.alter_id for a in active} <= {a.alter_id for a in full}
        sizes.append(len(active))
    assert sizes == sorted(sizes, reverse=True)


@given(st.integers(min_value=0, max_value=2**32))
@settings(max_examples=20, deadline=None)
def test_activity_permutation_invariant(seed):
    rnd = random.Random(seed)
    posts = _spread(2100, T0, 400)
    inter = [(ts, ["a"]) for ts in posts[::3]]
    plain = [ts for ts in posts if ts not in set(posts[::3])]
    base = check_activity(make_timeline(inter, plain=plain))
    rnd.shuffle(inter)
    rnd.shuffle(plain)
    assert check_activity(make_timeline(inter, plain=plain)) == base


def test_filter_order_independent():
    # egos failing different subsets of predicates
    cfg = ScenarioConfig(ego_count=40, bot_fraction=0.2, inactive_ego_fraction=0.2, seed=3)
    timelines, _ = generate_dataset(cfg)
    pc = PreprocessConfig()
    clf = make_classifier(pc)
    person = {t.ego_id for t in timelines if clf(t) == "person"}
    active = {t.ego_id for t in timelines if check_activity(t, pc).kept}
    has_alters = {t.ego_id for t in timelines if split_full_active(aggregate_relationships(t, pc))[1]}
    filters = [person, active, has_alters]
    finals = set()
    for order in itertools.permutations(range(3)):
        keep = {t.ego_id for t in timelines}
        for i in order:
            keep &= filters[i]
        finals.add(frozenset(keep))
    assert len(finals) == 1
    assert 0 < len(next(iter(finals))) < len(timelines)
    assert len(person) < len(timelines) and len(active) < len(timelines)
