"""Planted-preference world: factors, probabilities and sampled interactions."""
import numpy as np

from ahns.synth import generate_world, sample_interactions

spacer = "_" * 60

world = generate_world(num_users=200, num_items=300, dim=8, scale=2.0, seed=0, bias=-4.0)
probs = world.probabilities()
print("user factors", world.user_factors.shape, "item factors", world.item_factors.shape)
print("mean interaction probability %.4f" % probs.mean())
print("share of pairs above 0.5: %.4f" % (probs > 0.5).mean())
print(spacer)

ds = sample_interactions(world, per_user_count=20, rng=np.random.default_rng(1))
print("interactions:", ds.num_interactions, "users:", ds.num_users, "items:", ds.num_items)
print("item popularity: min %d, median %d, max %d" % (ds.item_popularity.min(), np.median(ds.item_popularity),
                                                       ds.item_popularity.max()))
# drawn items should carry more planted probability than a random item
drawn = probs[ds.pairs()[:, 0], ds.pairs()[:, 1]]
print("mean probability of drawn pairs %.4f vs all pairs %.4f" % (drawn.mean(), probs.mean()))
