"""Matrix factorisation scores, the pairwise loss and its gradients."""
import numpy as np

from ahns.model import bpr_gradients, bpr_loss, xavier_init

spacer = "_" * 60

model = xavier_init(num_users=3, num_items=5, dim=4, seed=0)
print("Xavier-uniform factors, bound sqrt(6 / (n + d)):")
print(np.round(model.user_factors, 3))
print("scores of user 0:", np.round(model.user_scores([0])[0], 4))
print(spacer)

for margin in (-2.0, 0.0, 2.0):
    print("loss at s_pos - s_neg = %+.0f: %.4f" % (margin, bpr_loss(margin, 0.0)))
print(spacer)

g = np.random.default_rng(0)
e_u, e_pos, e_neg = g.normal(size=(3, 4))
g_u, g_pos, g_neg = bpr_gradients(e_u, e_pos, e_neg)
h = 1e-6
fd = (bpr_loss(e_u @ (e_pos + h * np.eye(4)[0]), e_u @ e_neg) - bpr_loss(e_u @ (e_pos - h * np.eye(4)[0]), e_u @ e_neg)) / (2 * h)
print("d loss / d e_pos[0]: analytic %.8f, central difference %.8f" % (g_pos[0], fd))
print("gradients on the two items cancel:", np.allclose(g_pos + g_neg, 0))
