"""Full-ranking top-K evaluation and the softmax lower bound on NDCG."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from ahns.data import InteractionDataset
from ahns.errors import EvaluationError
from ahns.model import EmbeddingModel

DEFAULT_RECALL_KS = (20,)
DEFAULT_NDCG_KS = (20, 50)


@dataclass
class RankingResult:
    user_id: int
    ranked_items: np.ndarray
    relevance: np.ndarray | None = None


def rank_from_scores(scores, exclude=()) -> np.ndarray:
    """Item ids by descending score, lowest id first among ties, with ``exclude`` removed."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    if len(exclude):
        keep = np.ones(scores.size, dtype=bool)
        keep[np.asarray(list(exclude), dtype=np.int64)] = False
        order = order[keep[order]]
    return order


def rank_items(model: EmbeddingModel, u: int, exclude=(), test_positives=None) -> RankingResult:
    ranked = rank_from_scores(model.user_scores([u])[0], exclude)
    rel = None
    if test_positives is not None:
        rel = np.isin(ranked, np.asarray(list(test_positives), dtype=np.int64))
    return RankingResult(u, ranked, rel)


def _ranked(ranking) -> np.ndarray:
    return ranking.ranked_items if isinstance(ranking, RankingResult) else np.asarray(ranking)


def recall_at_k(ranking, test_positives, k: int) -> float:
    """Share of the test positives found in the first ``k`` ranked items."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pos = set(int(i) for i in test_positives)
    if not pos:
        raise EvaluationError("recall is undefined without test positives")
    hits = sum(1 for i in _ranked(ranking)[:k] if int(i) in pos)
    return hits / len(pos)


def idcg(n_pos: int, k: int) -> float:
    return float(sum(1.0 / math.log2(1 + r) for r in range(1, min(k, n_pos) + 1)))


def ndcg_at_k(ranking, test_positives, k: int) -> float:
    """Binary-gain NDCG truncated at ``k`` with ``log2(1 + rank)`` discounts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pos = set(int(i) for i in test_positives)
    if not pos:
        raise EvaluationError("ndcg is undefined without test positives")
    dcg = sum(1.0 / math.log2(1 + r) for r, i in enumerate(_ranked(ranking)[:k], start=1) if int(i) in pos)
    return dcg / idcg(len(pos), k)


def ndcg_lower_bound(scores, positives) -> float:
    """Lower bound on full-list NDCG from smoothing each rank indicator by ``exp``.

    For every positive ``i`` the term ``1 / (1 + sum_{j != i} exp(s_j - s_i))``
    equals the softmax weight of ``i`` over all items, so the bound is the
    mean softmax mass of the positives, computed through ``logsumexp``.
    """
    s = np.asarray(scores, dtype=np.float64)
    pos = np.unique(np.asarray(list(positives), dtype=np.int64))
    if pos.size == 0:
        raise EvaluationError("bound is undefined without positives")
    return float(np.mean(np.exp(s[pos] - logsumexp(s))))


def aggregate_metrics(per_user: Iterable[dict | None]) -> dict[str, float]:
    """Mean of each metric over users that have test positives (``None`` entries are skipped)."""
    rows = [r for r in per_user if r is not None]
    if not rows:
        raise EvaluationError("no evaluable users")
    keys = [k for k in rows[0] if k != "user"]
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}


def metric_names(recall_ks: Sequence[int] = DEFAULT_RECALL_KS, ndcg_ks: Sequence[int] = DEFAULT_NDCG_KS) -> list[str]:
    return [f"recall@{k}" for k in recall_ks] + [f"ndcg@{k}" for k in ndcg_ks]


def evaluate(model: EmbeddingModel, train: InteractionDataset, test: InteractionDataset,
             recall_ks: Sequence[int] = DEFAULT_RECALL_KS, ndcg_ks: Sequence[int] = DEFAULT_NDCG_KS,
             chunk: int = 1024, per_user: bool = False):
    """Full-ranking Recall@K / NDCG@K over every user with test positives.

    Candidates are all items except the user's train positives. Returns the
    aggregate dict, or ``(aggregate, per_user_rows)`` when ``per_user``.
    """
    names = metric_names(recall_ks, ndcg_ks)
    kmax = max(list(recall_ks) + list(ndcg_ks))
    test_deg = test.user_degree()
    users = np.nonzero(test_deg > 0)[0]
    if users.size == 0:
        raise EvaluationError("no evaluable users")
    test_index = test.index()
    discount = 1.0 / np.log2(np.arange(2, kmax + 2))
    cum_disc = np.concatenate([[0.0], np.cumsum(discount)])
    rows = np.empty((users.size, len(names)))
    u_item = train.items
    for start in range(0, users.size, chunk):
        uc = users[start:start + chunk]
        scores = model.user_scores(uc)
        # mask train positives
        lo = train._offsets[uc]
        hi = train._offsets[uc + 1]
        r_idx = np.repeat(np.arange(uc.size), hi - lo)
        c_idx = u_item[np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)])] if r_idx.size else np.zeros(0, np.int64)
        scores[r_idx, c_idx] = -np.inf
        top = np.argsort(-scores, axis=1, kind="stable")[:, :kmax]
        valid = np.take_along_axis(scores, top, axis=1) > -np.inf
        hit = test_index.contains(np.repeat(uc[:, None], top.shape[1], axis=1), top) & valid
        n_pos = test_deg[uc].astype(np.float64)
        col = 0
        for k in recall_ks:
            rows[start:start + uc.size, col] = hit[:, :k].sum(axis=1) / n_pos
            col += 1
        for k in ndcg_ks:
            h = hit[:, :k]  # fewer columns than k when a user has fewer candidates
            dcg = (h * discount[:h.shape[1]]).sum(axis=1)
            ideal = cum_disc[np.minimum(k, test_deg[uc])]
            rows[start:start + uc.size, col] = dcg / ideal
            col += 1
    agg = {n: float(rows[:, j].mean()) for j, n in enumerate(names)}
    if per_user:
        return agg, [dict(zip(names, r.tolist()), user=int(u)) for u, r in zip(users, rows)]
    return agg


def write_metrics_report(records: Sequence[tuple[int, str, float]], path_json=None, path_csv=None) -> None:
    """Write ``(epoch, metric, value)`` rows as JSON (list of objects) and/or CSV."""
    if path_json is not None:
        Path(path_json).write_text(json.dumps([{"epoch": e, "metric": m, "value": v} for e, m, v in records],
                                              indent=2) + "\n", encoding="utf-8")
    if path_csv is not None:
        with Path(path_csv).open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["epoch", "metric", "value"])
            w.writerows((e, m, repr(float(v))) for e, m, v in records)


def read_metrics_csv(path) -> list[tuple[int, str, float]]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return [(int(r["epoch"]), r["metric"], float(r["value"])) for r in reader]
