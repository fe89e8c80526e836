import math

import numpy as np
import pytest

from ahns.data import parse_interactions, write_interactions_csv
from ahns.errors import EmptyDatasetError
from ahns.synth import generate_dataset, generate_world, sample_interactions


def test_world_is_reproducible():
    a, b = generate_world(20, 30, 4, 2.0, seed=5), generate_world(20, 30, 4, 2.0, seed=5)
    assert np.array_equal(a.user_factors, b.user_factors) and np.array_equal(a.item_factors, b.item_factors)
    assert not np.array_equal(a.user_factors, generate_world(20, 30, 4, 2.0, seed=6).user_factors)


def test_scale_zero_gives_one_half():
    w = generate_world(5, 7, 3, scale=0.0, seed=1)
    assert np.all(w.probabilities() == 0.5)


def test_dot_products_have_unit_variance():
    w = generate_world(400, 400, 16, seed=2)
    dots = w.user_factors @ w.item_factors.T
    assert np.var(dots) == pytest.approx(1.0, rel=0.1)


def test_mean_interaction_rate_monte_carlo():
    # analytic-free check: empirical Bernoulli rate over 10k pairs vs the mean model probability
    w = generate_world(100, 100, 4, scale=1.5, seed=3, bias=-1.0)
    p = w.probabilities().ravel()
    g = np.random.default_rng(0)
    hits = g.random(p.size) < p
    sigma = math.sqrt(np.sum(p * (1 - p))) / p.size
    assert abs(hits.mean() - p.mean()) < 3 * sigma


def test_full_count_covers_every_item():
    w = generate_world(4, 9, 2, seed=0)
    ds = sample_interactions(w, 9, np.random.default_rng(0))
    assert ds.num_interactions == 36


def test_zero_count_is_empty_dataset_error():
    w = generate_world(4, 9, 2, seed=0)
    with pytest.raises(EmptyDatasetError):
        sample_interactions(w, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_interactions(w, 10, np.random.default_rng(0))


def test_top_probability_item_drawn_most():
    # sparse world with one item aligned to every user: it has the largest probability for all of them
    w = generate_world(1000, 30, 2, scale=2.0, seed=4, bias=-3.0)
    w.user_factors[:] = np.abs(w.user_factors)
    w.item_factors[0] = np.abs(w.item_factors).max(axis=0) * 1.5
    probs = w.probabilities()
    assert np.all(np.argmax(probs, axis=1) == 0)
    ds = sample_interactions(w, 1, np.random.default_rng(1))
    assert int(np.argmax(ds.item_popularity)) == 0


def test_generate_dataset_deterministic_and_valid(tmp_path):
    a = generate_dataset(50, 60, 4, 2.0, 8, seed=3, bias=-2.0)
    b = generate_dataset(50, 60, 4, 2.0, 8, seed=3, bias=-2.0)
    assert np.array_equal(a.pairs(), b.pairs())
    assert a.num_interactions == 400 and np.all(a.user_degree() == 8)
    assert a.item_popularity.sum() == a.num_interactions
    write_interactions_csv(a, tmp_path / "s.csv")
    assert parse_interactions(tmp_path / "s.csv").num_interactions == 400


def test_bias_makes_preferences_sparse():
    dense = generate_world(50, 200, 8, scale=2.0, seed=0).probabilities().mean()
    sparse = generate_world(50, 200, 8, scale=2.0, seed=0, bias=-6.0).probabilities().mean()
    assert sparse < 0.05 < dense
