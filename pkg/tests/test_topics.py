import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from senm.errors import DegenerateVariance, ValidationError
from senm.ingestion import InteractionRecord
from senm.topics import (
    TOPICS, Stopwords, TermStats, assign_topic_labels, canonical_form, correlate_features,
    default_labelmap, load_labelmap, normalize_token, pearson_with_p, tokenize_words, top_k_terms,
    topic_features,
)


def rec(text, tags=None, lang=None):
    from senm.ingestion import extract_hashtags
    return InteractionRecord("e", ("a",), 1, "reply", text=text, lang=lang,
                             hashtags=tuple(extract_hashtags(text) if tags is None else tags))


def test_normalize_examples():
    assert normalize_token("Café!", "word") is None
    assert normalize_token("GFVIP", "hashtag") == "gfvip"
    assert normalize_token("Señorita", "word") == "senorita"
    assert normalize_token("a", "hashtag") == "a"
    assert normalize_token("there", "word", frozenset({"there"})) is None
    with pytest.raises(ValueError):
        normalize_token("x", "emoji")


@given(st.text(max_size=20), st.sampled_from(["word", "hashtag"]))
def test_normalize_idempotent(token, kind):
    once = normalize_token(token, kind)
    if once is not None:
        assert normalize_token(once, kind) == once


@given(st.text(max_size=30))
def test_canonical_form_fast_path_agrees(text):
    from senm.topics import _canonical_unicode
    assert canonical_form(text) == _canonical_unicode(text)


def test_tokenize_strips_tags_and_links():
    assert tokenize_words("Watch https://x.co/abc #Tag @someone, NOW!") == ["watch", "now"]


def test_hashtag_ranking():
    recs = [rec("a #x"), rec("b #X"), rec("c #y")]
    ranked = top_k_terms(recs, "hashtag", k=20)
    assert [(t.term, t.mentions, t.rank) for t in ranked] == [("x", 2, 1), ("y", 1, 2)]
    assert ranked.truncated


def test_ties_broken_lexicographically():
    recs = [rec("#delta #alpha #charlie #bravo")]
    ranked = top_k_terms(recs, "hashtag", k=2)
    assert [t.term for t in ranked] == ["alpha", "bravo"]
    assert not ranked.truncated


def test_word_counting_is_per_occurrence_with_stopwords():
    stop = Stopwords({"en": frozenset({"about"}), "es": frozenset({"porque"})})
    recs = [rec("Energy energy ENERGY about porque", lang="en"), rec("porque energía", lang="es")]
    counts = {t.term: t.mentions for t in top_k_terms(recs, "word", 10, stop)}
    assert counts == {"energy": 3, "porque": 1, "energia": 1}


def test_packaged_stopwords_and_labelmap(tmp_path):
    sw = Stopwords.load()
    assert "because" in sw.for_lang("en")
    assert sw.for_lang(None) >= sw.for_lang("en")
    lm = default_labelmap()
    assert lm["covid19"] == "covid"
    p = tmp_path / "lm.csv"
    p.write_text("term,topic\nBrexit,Political\n", encoding="utf-8")
    assert load_labelmap(p) == {"brexit": "political"}
    p.write_text("term,topic\nfoo,sports\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_labelmap(p)


def test_topic_labels():
    terms = [TermStats("covid19", "hashtag", 3, 1), TermStats("sunsets", "hashtag", 2, 2)]
    labeled = assign_topic_labels(terms, {"covid19": "covid"})
    assert [t.topic for t in labeled] == ["covid", "general"]
    all_general = [TermStats(f"t{i}", "hashtag", 50, i + 1) for i in range(20)]
    feats = topic_features(assign_topic_labels(all_general, {}))
    assert feats["general"] == (20, 1000, 1.0)


def test_proportional_mentions():
    terms = [TermStats("a", "hashtag", 300, 1, "political"), TermStats("b", "hashtag", 900, 2, "general")]
    assert topic_features(terms)["political"] == (1, 300, 0.25)


@given(st.lists(st.tuples(st.integers(min_value=1, max_value=10**6), st.sampled_from(TOPICS)),
                min_size=1, max_size=20))
def test_proportions_sum_to_one(items):
    terms = [TermStats(f"t{i}", "hashtag", m, i + 1, topic) for i, (m, topic) in enumerate(items)]
    feats = topic_features(terms)
    assert abs(sum(f[2] for f in feats.values()) - 1.0) < 1e-12
    assert sum(f[0] for f in feats.values()) == len(terms)


def test_pearson_examples():
    x = np.arange(5.0)
    res = pearson_with_p(x, 2 * x + 1)
    assert res.r == 1.0 and res.p_two_tailed == pytest.approx(0.0, abs=1e-12) and res.df == 3
    assert pearson_with_p([1, 2, 3], [6, 4, 5]).r == pytest.approx(-0.5)
    with pytest.raises(DegenerateVariance):
        pearson_with_p([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson_with_p([1, 2], [1, 2])


def _pair_with_r(r, n, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    a -= a.mean()
    b -= b.mean()
    b -= (a @ b) / (a @ a) * a
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    return a, r * a + math.sqrt(1 - r * r) * b


def test_pearson_p_matches_t_table():
    # r(9) = -0.64; critical t(0.975, 9) = 2.262 corresponds to |r| = 0.602
    x, y = _pair_with_r(-0.64, 11)
    res = pearson_with_p(x, y)
    assert res.r == pytest.approx(-0.64, abs=1e-12) and res.df == 9
    assert 0.02 < res.p_two_tailed < 0.05
    t_crit = 2.262
    r_crit = t_crit / math.sqrt(9 + t_crit ** 2)
    xc, yc = _pair_with_r(-r_crit, 11, seed=1)
    assert pearson_with_p(xc, yc).p_two_tailed == pytest.approx(0.05, abs=2e-4)


@given(st.data())
@settings(max_examples=200)
def test_pearson_symmetric_and_matches_scipy(data):
    n = data.draw(st.integers(min_value=3, max_value=20))
    x = data.draw(st.lists(st.integers(-1000, 1000), min_size=n, max_size=n))
    y = data.draw(st.lists(st.integers(-1000, 1000), min_size=n, max_size=n))
    try:
        a = pearson_with_p(x, y)
    except DegenerateVariance:
        return
    b = pearson_with_p(y, x)
    assert a.r == pytest.approx(b.r, abs=1e-12)
    assert a.p_two_tailed == pytest.approx(b.p_two_tailed, rel=1e-9, abs=1e-12)
    ref = stats.pearsonr(x, y)
    assert a.r == pytest.approx(ref[0], abs=1e-10)
    if abs(a.r) < 1 - 1e-6:
        # near |r| = 1 with few df, p is dominated by rounding in either implementation
        assert a.p_two_tailed == pytest.approx(ref[1], rel=1e-6, abs=1e-10)
    same = pearson_with_p(x, x)
    assert (same.r, same.p_two_tailed) == (1.0, 0.0)


def test_correlate_features_skips_constant_columns():
    feats = {f"d{i}": {t: (0, 0, 0.0) for t in TOPICS} for i in range(4)}
    for i in range(4):
        feats[f"d{i}"]["general"] = (20 - i, 100 * (20 - i), 1.0)
    out = correlate_features(feats, {f"d{i}": 10.0 + 5 * i for i in range(4)})
    assert [c.feature for c in out] == ["general.count", "general.mentions"]
    assert all(c.r == pytest.approx(-1.0) for c in out)
