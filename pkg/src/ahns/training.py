"""Mini-batch BPR training with per-triple negative sampling."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ahns.model import EmbeddingModel, bpr_gradients, softplus
from ahns.optim import AdamState, accumulate_rows, adam_step
from ahns.samplers import NegativeSampler
from ahns.telemetry import EpochTelemetry, TelemetryAccumulator


def train_batch(model: EmbeddingModel, users: np.ndarray, pos: np.ndarray, sampler: NegativeSampler,
                optimizer: AdamState, rng: np.random.Generator, acc: TelemetryAccumulator) -> None:
    """Sample one negative per positive, then take one Adam step on the mean BPR loss."""
    neg = sampler.sample_batch(users, pos, model, rng)
    losses = softplus(neg.neg_scores - neg.pos_scores)
    e_u = model.user_factors[users]
    g_u, g_pos, g_neg = bpr_gradients(e_u, model.item_factors[pos], model.item_factors[neg.items])
    scale = 1.0 / users.size
    u_rows, u_grad = accumulate_rows(users, g_u * scale)
    i_rows, i_grad = accumulate_rows(pos, g_pos * scale, neg.items, g_neg * scale)
    adam_step({"user": model.user_factors, "item": model.item_factors},
              {"user": (u_rows, u_grad), "item": (i_rows, i_grad)}, optimizer)
    acc.record_batch(users, neg, losses)


def train_epoch(model: EmbeddingModel, pairs: np.ndarray, sampler: NegativeSampler, optimizer: AdamState,
                batch_size: int, rng: np.random.Generator, accumulator: TelemetryAccumulator | None = None,
                epoch: int = 0, workers: int = 1) -> EpochTelemetry:
    """One pass over the shuffled training pairs.

    ``seconds`` on the returned telemetry covers sampling and updates only.
    With ``workers > 1`` batches are spread over threads that update the
    shared tables without locks, so results are no longer reproducible.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    acc = accumulator if accumulator is not None else TelemetryAccumulator()
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    t0 = time.perf_counter()
    sampler.begin_epoch()
    n = pairs.shape[0]
    if n:
        order = rng.permutation(n)
        batches = [order[s:s + batch_size] for s in range(0, n, batch_size)]
        if workers <= 1:
            for b in batches:
                train_batch(model, pairs[b, 0], pairs[b, 1], sampler, optimizer, rng, acc)
        else:
            _train_parallel(model, pairs, batches, sampler, optimizer, rng, acc, workers)
    seconds = time.perf_counter() - t0
    selected = acc.selected_keys() if acc.track_selected else None
    t = acc.finalize_epoch(epoch, seconds=seconds)
    t.selected_keys = selected
    return t


def _train_parallel(model, pairs, batches, sampler, optimizer, rng, acc, workers):
    streams = rng.spawn(workers)
    local = [TelemetryAccumulator(acc.held_out, acc.num_items, acc.track_selected) for _ in range(workers)]

    def work(w):
        for b in batches[w::workers]:
            train_batch(model, pairs[b, 0], pairs[b, 1], sampler, optimizer, streams[w], local[w])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, range(workers)))
    for part in local:
        acc.merge(part)
