"""The five samplers side by side on one user, plus the AHNS hardness curve."""
import numpy as np

from ahns.data import InteractionDataset
from ahns.model import EmbeddingModel
from ahns.samplers import NegativeSampler, SamplerSpec, ideal_hardness

spacer = "_" * 60

# one user, item i scores i / 10, items 0-2 are positives
scores = np.arange(20) / 10
model = EmbeddingModel(np.array([[1.0]]), scores[:, None])
pairs = [(0, 0), (0, 1), (0, 2)] + [(1, i) for i in range(15, 20)]
ds = InteractionDataset.from_pairs(pairs, num_users=2, num_items=20)

specs = [SamplerSpec("rns"), SamplerSpec("pns", gamma=1.0), SamplerSpec("dns", m=8),
         SamplerSpec("dns_mn", m=8, n=3), SamplerSpec("ahns", m=8, alpha=1.0, beta=0.5, p=-2.0)]
for pos in (0, 2):
    print("positive item %d (score %.1f)" % (pos, scores[pos]))
    for spec in specs:
        smp = NegativeSampler(spec, ds)
        rng = np.random.default_rng(0)
        picks = [smp.sample(0, pos, model, rng).item_id for _ in range(400)]
        print("  %-28s mean selected score %.3f" % (spec.label, scores[picks].mean()))
print(spacer)

print("ideal hardness beta * (s_pos + alpha)^p for alpha=1, beta=0.5:")
s_pos = np.array([0.0, 0.5, 1.0, 2.0])
for p in (-0.5, -1.0, -2.0):
    print("  p=%4.1f:" % p, np.round(ideal_hardness(s_pos, 1.0, 0.5, p), 4))
print("every curve passes through (1 - alpha, beta):", ideal_hardness(0.0, 1.0, 0.5, -2.0))
