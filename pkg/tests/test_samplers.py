import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import oracles
from ahns.data import InteractionDataset
from ahns.errors import ExhaustedItemsError, SamplerError
from ahns.model import EmbeddingModel
from ahns.samplers import (AliasTable, NegativeSampler, SamplerKind, SamplerSpec, ahns_rating, ahns_select,
                           ahns_target, dns_mn_sample, dns_sample, hardness, ideal_hardness, pns_sample,
                           rns_sample, sample_candidates, select_max, select_min_rating, select_top_n_uniform)

ALPHAS = (0.1, 0.5, 1.0)
BETAS = (0.1, 0.5, 1.0)
PS = (-0.5, -1.0, -2.0)


def line_model(item_scores, user_scale=1.0):
    """One user whose score for item i is ``item_scores[i]`` (dim 1)."""
    return EmbeddingModel(np.array([[user_scale]]), np.asarray(item_scores, dtype=np.float64)[:, None])


def one_user(num_items, positives):
    return InteractionDataset.from_pairs([(0, i) for i in positives], num_users=1, num_items=num_items)


# ---- candidates ------------------------------------------------------

def test_candidates_exclude_positives(rng):
    ds = one_user(10, [2, 5, 7])
    for _ in range(200):
        c = sample_candidates(0, 4, rng, ds)
        assert c.shape == (4,) and not set(c.tolist()) & {2, 5, 7}


def test_single_allowed_item_is_forced(rng):
    ds = one_user(2, [0])
    assert all(sample_candidates(0, 1, rng, ds)[0] == 1 for _ in range(50))
    spec = SamplerSpec("rns")
    model = line_model([1.0, 0.5])
    assert all(rns_sample(0, 0, model, spec, rng, ds).item_id == 1 for _ in range(20))


def test_candidates_uniform_chi_square(rng):
    ds = one_user(12, [0, 3, 4, 11])
    draws = NegativeSampler(SamplerSpec("rns"), ds).candidates(np.zeros(20000, np.int64), 5, rng).ravel()
    counts = np.bincount(draws, minlength=12)
    assert counts[[0, 3, 4, 11]].sum() == 0
    allowed = counts[[1, 2, 5, 6, 7, 8, 9, 10]]
    assert stats.chisquare(allowed).pvalue > 1e-4


def test_fallback_when_rejection_is_slow(rng):
    # 1 allowed item out of 400: rejection almost always runs out of rounds
    ds = one_user(400, [i for i in range(400) if i != 123])
    c = NegativeSampler(SamplerSpec("rns"), ds).candidates(np.zeros(50, np.int64), 3, rng)
    assert np.all(c == 123)


def test_exhausted_user_raises(rng):
    ds = one_user(3, [0, 1, 2])
    with pytest.raises(ExhaustedItemsError):
        sample_candidates(0, 2, rng, ds)


# ---- SamplerSpec ------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(kind="ahns", alpha=0), dict(kind="ahns", beta=-1), dict(kind="ahns", p=0.5),
                                dict(kind="dns", m=0), dict(kind="dns_mn", m=4, n=5), dict(kind="pns", gamma=-1),
                                dict(kind="bogus")])
def test_spec_validation(kw):
    with pytest.raises(SamplerError):
        SamplerSpec(**kw)


def test_spec_roundtrip():
    s = SamplerSpec("dns_mn", m=8, n=3)
    assert SamplerSpec.from_dict(s.to_dict()) == s
    assert s.kind is SamplerKind.DNS_MN
    assert set(s.to_dict()) == {"kind", "m", "gamma", "n", "alpha", "beta", "p"}
    with pytest.raises(SamplerError):
        SamplerSpec.from_dict({**s.to_dict(), "temperature": 1})


# ---- hardness and the ideal-hardness curve ----------------------------

def test_hardness_examples():
    assert hardness(0.3, 1.0) == pytest.approx(0.3)
    assert hardness(0.3, 0.0) is None
    assert hardness(0.5, 1e-7) is None
    assert hardness(0.8, 0.8) == 1.0
    arr = hardness(np.array([1.0, 1.0]), np.array([2.0, -1.0]))
    assert arr[0] == 0.5 and math.isnan(arr[1])


def test_ideal_hardness_examples():
    assert ideal_hardness(1.0, 1.0, 1.0, -1.0) == 0.5
    for a in ALPHAS:
        for p in PS:
            assert ideal_hardness(1 - a, a, 0.7, p) == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(ValueError):
        ideal_hardness(-2.0, 1.0, 1.0, -2.0)


def test_ideal_hardness_decreasing_on_reference_grid():
    grid = np.round(np.arange(0, 3.0001, 0.1), 10)
    for p in PS:
        h = ideal_hardness(grid, 1.0, 1.0, p)
        assert np.all(np.diff(h) < 0)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-5, -0.01), st.floats(0, 5), st.floats(1e-3, 2))
def test_ideal_hardness_strictly_decreasing(alpha, beta, p, s, ds):
    assert ideal_hardness(s + ds, alpha, beta, p) < ideal_hardness(s, alpha, beta, p)


@given(st.floats(0.05, 2), st.floats(0.05, 2), st.floats(0, 3))
def test_smaller_p_magnitude_ordering(alpha, beta, s):
    base = s + alpha
    hi, lo = ideal_hardness(s, alpha, beta, -0.5), ideal_hardness(s, alpha, beta, -2.0)
    if base > 1 + 1e-9:
        assert lo < hi
    elif base < 1 - 1e-9:
        assert lo > hi


# ---- AHNS rating -------------------------------------------------------

def test_rating_examples():
    assert ahns_rating(0.45, 3.0, 1.0, 0.5, -1.0) == pytest.approx(0.05)
    assert ahns_target(1.0, 1.0, 1.0, -2.0) == 0.5
    assert ahns_rating(0.7, 1.0, 1.0, 1.0, -2.0) == pytest.approx(0.2)
    for p in PS:
        assert ahns_target(0.6, 0.4, 0.3, p) == pytest.approx(0.3, abs=1e-12)


def test_rating_clamps_nonpositive_base():
    # base clamped to 1e-6: target = beta * (1e-6) ** (p + 1)
    assert ahns_target(-5.0, 1.0, 0.5, -0.5) == pytest.approx(0.5 * 1e-3)
    assert np.isfinite(ahns_rating(0.0, -5.0, 1.0, 0.5, -2.0))


def test_ahns_select_rule_examples():
    cands = np.array([[4, 7, 9]])
    items, s = select_min_rating(cands, np.abs(np.array([[0.1, 0.45, 0.9]]) - 0.5), np.array([[0.1, 0.45, 0.9]]))
    assert items[0] == 7 and s[0] == 0.45
    # equidistant from 0.5: ids 9 (0.4) and 4 (0.6) tie, lowest id wins
    sc = np.array([[0.4, 0.6, 0.9]])
    items, s = select_min_rating(np.array([[9, 4, 2]]), np.abs(sc - 0.5), sc)
    assert items[0] == 4 and s[0] == 0.6


def test_max_rule_examples():
    items, s = select_max(np.array([[3, 1, 2]]), np.array([[0.1, 0.9, 0.4]]))
    assert items[0] == 1 and s[0] == 0.9
    items, _ = select_max(np.array([[8, 5, 6]]), np.array([[0.9, 0.9, 0.1]]))
    assert items[0] == 5


def test_dns_sample_picks_best_candidate(rng):
    ds = one_user(6, [0])
    model = line_model([5.0, 0.1, 0.9, 0.4, 0.9, -1.0])
    spec = SamplerSpec("dns", m=64)
    # with 64 draws over 5 items every item is a candidate; 2 and 4 tie at 0.9
    picks = {dns_sample(0, 0, model, spec, rng, ds).item_id for _ in range(20)}
    assert picks == {2}


def test_dns_m1_equals_rns(rng):
    ds = InteractionDataset.from_pairs([(u, (3 * u) % 20) for u in range(10)], num_users=10, num_items=20)
    model = EmbeddingModel(np.random.default_rng(1).normal(size=(10, 3)), np.random.default_rng(2).normal(size=(20, 3)))
    users = np.arange(10).repeat(5)
    pos = (3 * users) % 20
    a = NegativeSampler(SamplerSpec("dns", m=1), ds).sample_batch(users, pos, model, np.random.default_rng(5))
    b = NegativeSampler(SamplerSpec("rns"), ds).sample_batch(users, pos, model, np.random.default_rng(5))
    assert np.array_equal(a.items, b.items)


def test_dns_mn_reductions():
    ds = InteractionDataset.from_pairs([(u, u) for u in range(8)], num_users=8, num_items=30)
    g = np.random.default_rng(0)
    model = EmbeddingModel(g.normal(size=(8, 4)), g.normal(size=(30, 4)))
    users = np.arange(8).repeat(50)
    a = NegativeSampler(SamplerSpec("dns_mn", m=6, n=1), ds).sample_batch(users, users, model, np.random.default_rng(3))
    b = NegativeSampler(SamplerSpec("dns", m=6), ds).sample_batch(users, users, model, np.random.default_rng(3))
    assert np.array_equal(a.items, b.items)

    # N = M: the pick is uniform over candidate slots
    smp = NegativeSampler(SamplerSpec("dns_mn", m=4, n=4), ds)
    cands = np.array([[1, 2, 3, 4]] * 40000)
    scores = np.tile(np.array([0.3, 0.9, -0.2, 0.5]), (40000, 1))
    items, _ = select_top_n_uniform(cands, scores, 4, np.random.default_rng(9))
    counts = np.bincount(items, minlength=5)[1:]
    assert stats.chisquare(counts).pvalue > 1e-4
    assert smp.spec.n == smp.spec.m


def test_dns_mn_top3_membership(rng):
    for _ in range(300):
        cands = rng.integers(0, 50, size=(1, 8))
        scores = np.round(rng.normal(size=(1, 8)), 1)
        item, _ = select_top_n_uniform(cands, scores, 3, rng)
        ordered = sorted(zip(cands[0].tolist(), scores[0].tolist()), key=lambda t: (-t[1], t[0]))
        assert item[0] in {c for c, _ in ordered[:3]}


def test_ahns_select_matches_oracle_small(rng):
    ds = one_user(40, [0, 1])
    g = np.random.default_rng(4)
    model = line_model(np.round(g.normal(size=40), 2), user_scale=1.0)
    spec = SamplerSpec("ahns", m=8, alpha=0.5, beta=0.4, p=-2.0)
    smp = NegativeSampler(spec, ds)
    for _ in range(200):
        state = rng.bit_generator.state
        neg = smp.sample(0, 1, model, rng)
        rng2 = np.random.default_rng()
        rng2.bit_generator.state = state
        cands = smp.candidates(np.array([0]), 8, rng2)[0].tolist()
        s_pos = model.score(0, 1)
        expected = oracles.ahns_argmin(cands, [model.score(0, c) for c in cands], s_pos, 0.5, 0.4, -2.0)
        assert neg.item_id == expected
        assert neg.candidate_count_used == 8
        assert neg.score_at_selection == model.score(0, expected)


def test_clamped_base_is_flagged(rng):
    ds = one_user(5, [0])
    model = line_model([-3.0, 0.1, 0.2, 0.3, 0.4])
    neg = ahns_select(0, 0, model, SamplerSpec("ahns", m=4, alpha=1.0), rng, ds)
    assert neg.base_clamped and neg.hardness_at_selection is None


def test_wrapper_rejects_wrong_kind(rng, small_dataset):
    with pytest.raises(SamplerError):
        dns_sample(0, 0, line_model([0] * 8), SamplerSpec("rns"), rng, small_dataset)


# ---- PNS and the alias table ---------------------------------------------

def pns_frequencies(popularity, positives, gamma, n, seed=0):
    """User 0 holds ``positives``; other users shape the popularity."""
    pairs = [(0, i) for i in positives]
    u = 1
    for item, count in enumerate(popularity):
        for _ in range(count):
            pairs.append((u, item))
            u += 1
    ds = InteractionDataset.from_pairs(pairs)
    smp = NegativeSampler(SamplerSpec("pns", gamma=gamma), ds)
    draws = smp._pns_draw(np.zeros(n, np.int64), np.random.default_rng(seed))
    return np.bincount(draws, minlength=ds.num_items), ds


def test_pns_popularity_ratio():
    counts, _ = pns_frequencies([0, 1, 3], [0], 1.0, 100000)
    assert counts[0] == 0
    # items 1, 2 have popularity 1, 3: expected share 1:3 (3σ binomial)
    n = counts[1] + counts[2]
    assert abs(counts[1] - n / 4) < 3 * math.sqrt(n * 0.25 * 0.75)


def test_pns_symmetric_popularity_is_uniform():
    counts, _ = pns_frequencies([0, 2, 2, 2], [0], 1.0, 60000)
    assert stats.chisquare(counts[1:]).pvalue > 1e-4


def test_pns_gamma_zero_is_uniform():
    counts, _ = pns_frequencies([0, 1, 9, 30, 2], [0], 0.0, 60000)
    assert counts[0] == 0 and stats.chisquare(counts[1:]).pvalue > 1e-4


def test_pns_zero_mass_falls_back_to_uniform(rng):
    # every item the user may draw has popularity 0
    ds = InteractionDataset.from_pairs([(0, 0), (1, 0)], num_users=2, num_items=4)
    smp = NegativeSampler(SamplerSpec("pns", gamma=1.0), ds)
    draws = smp._pns_draw(np.zeros(30000, np.int64), rng)
    counts = np.bincount(draws, minlength=4)
    assert counts[0] == 0 and stats.chisquare(counts[1:]).pvalue > 1e-4
    neg = pns_sample(0, 0, line_model([1, 2, 3, 4]), SamplerSpec("pns"), rng, ds)
    assert neg.item_id != 0


def test_alias_table_distribution(rng):
    w = np.array([0.0, 1.0, 2.0, 0.0, 7.0])
    t = AliasTable(w)
    counts = np.bincount(t.sample(rng, 100000), minlength=5)
    assert counts[0] == 0 and counts[3] == 0
    assert stats.chisquare(counts[[1, 2, 4]], 100000 * w[[1, 2, 4]] / 10).pvalue > 1e-4
    with pytest.raises(ValueError):
        AliasTable([0.0, 0.0])


@given(st.lists(st.floats(0, 100), min_size=1, max_size=30).filter(lambda w: sum(w) > 0))
def test_alias_table_probabilities_exact(w):
    t = AliasTable(w)
    n = len(w)
    implied = np.zeros(n)
    for k in range(n):
        implied[k] += t.prob[k] / n
        implied[t.alias[k]] += (1 - t.prob[k]) / n
    np.testing.assert_allclose(implied, np.asarray(w) / sum(w), atol=1e-9)


# ---- invariants over every sampler ---------------------------------------

SPECS = [SamplerSpec("rns"), SamplerSpec("pns", gamma=0.75), SamplerSpec("dns", m=5),
         SamplerSpec("dns_mn", m=6, n=2), SamplerSpec("ahns", m=5, alpha=0.5, beta=0.3, p=-1.5)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(SPECS))
def test_no_sampler_returns_a_train_positive(seed, spec):
    g = np.random.default_rng(seed)
    nu, ni = 6, 15
    pairs = {(int(u), int(i)) for u, i in zip(g.integers(0, nu, 50), g.integers(0, ni, 50))}
    pairs |= {(u, u) for u in range(nu)}
    ds = InteractionDataset.from_pairs(sorted(pairs), num_users=nu, num_items=ni)
    model = EmbeddingModel(g.normal(size=(nu, 3)), g.normal(size=(ni, 3)))
    smp = NegativeSampler(spec, ds)
    batch = smp.sample_batch(ds.users, ds.items, model, g)
    assert not ds.index().contains(ds.users, batch.items).any()
    np.testing.assert_allclose(batch.neg_scores, model.score_pairs(ds.users, batch.items), atol=1e-12)


def test_dns_scores_dominate_rns():
    g = np.random.default_rng(11)
    ds = InteractionDataset.from_pairs([(u, u) for u in range(20)], num_users=20, num_items=100)
    model = EmbeddingModel(g.normal(size=(20, 4)), g.normal(size=(100, 4)))
    users = np.tile(np.arange(20), 500)
    d = NegativeSampler(SamplerSpec("dns", m=8), ds).sample_batch(users, users, model, g)
    r = NegativeSampler(SamplerSpec("rns"), ds).sample_batch(users, users, model, g)
    assert d.neg_scores.mean() > r.neg_scores.mean()
    qs = [10, 25, 50, 75, 90]
    assert np.all(np.percentile(d.neg_scores, qs) >= np.percentile(r.neg_scores, qs))


def test_ahns_hardness_within_candidate_span():
    g = np.random.default_rng(2)
    ds = InteractionDataset.from_pairs([(u, u) for u in range(10)], num_users=10, num_items=60)
    model = EmbeddingModel(np.abs(g.normal(size=(10, 3))), np.abs(g.normal(size=(60, 3))))
    users = np.tile(np.arange(10), 30)
    b = NegativeSampler(SamplerSpec("ahns", m=6), ds).sample_batch(users, users, model, g)
    cand_h = model.score_pairs(users, b.candidates) / b.pos_scores[:, None]
    ok = ~np.isnan(b.hardness)
    assert ok.all()
    assert np.all(b.hardness >= cand_h.min(axis=1)) and np.all(b.hardness <= cand_h.max(axis=1))
