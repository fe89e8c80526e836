"""Full-ranking metrics and the softmax lower bound on NDCG."""
import numpy as np

from ahns.evaluation import ndcg_at_k, ndcg_lower_bound, rank_from_scores, recall_at_k

spacer = "_" * 60

scores = np.array([0.9, 0.1, 0.8, 0.8, 0.3, 0.7])
ranked = rank_from_scores(scores, exclude=[0])
print("ranking with item 0 masked (ties by lowest id):", ranked.tolist())
print("recall@2 for test items {3, 4}: %.3f" % recall_at_k(ranked, {3, 4}, 2))
print("ndcg@5  for test items {3, 4}: %.3f" % ndcg_at_k(ranked, {3, 4}, 5))
print("a single positive at rank 3 scores", ndcg_at_k([5, 6, 7], {7}, 20))
print(spacer)

g = np.random.default_rng(0)
for temp in (0.5, 2.0, 8.0):
    s = g.normal(size=30) * temp
    pos = [0, 1, 2]
    full = ndcg_at_k(rank_from_scores(s), pos, 30)
    print("score spread %.1f: full NDCG %.4f >= bound %.4f" % (temp, full, ndcg_lower_bound(s, pos)))
