"""Synthetic implicit-feedback worlds with known latent preferences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ahns.data import InteractionDataset
from ahns.model import sigmoid


@dataclass
class LatentWorld:
    """Ground-truth factors; user ``u`` likes item ``i`` with probability ``sigmoid(scale * u . i + bias)``.

    A negative ``bias`` makes preferences sparse; with ``bias = 0`` every
    user likes roughly half the catalogue and interactions are close to
    uniform over that half.
    """

    user_factors: np.ndarray
    item_factors: np.ndarray
    scale: float
    seed: int
    bias: float = 0.0

    @property
    def num_users(self) -> int:
        return self.user_factors.shape[0]

    @property
    def num_items(self) -> int:
        return self.item_factors.shape[0]

    def probabilities(self, users=None) -> np.ndarray:
        u = self.user_factors if users is None else self.user_factors[np.asarray(users)]
        return sigmoid(self.scale * (u @ self.item_factors.T) + self.bias)


def generate_world(num_users: int, num_items: int, dim: int, scale: float = 1.0, seed: int = 0,
                   bias: float = 0.0) -> LatentWorld:
    """Draw user and item factors i.i.d. from ``N(0, I / sqrt(dim))`` so dot products have unit variance."""
    if min(num_users, num_items, dim) < 1:
        raise ValueError("num_users, num_items and dim must be >= 1")
    rng = np.random.default_rng(seed)
    std = dim ** -0.25
    return LatentWorld(rng.normal(0.0, std, size=(num_users, dim)),
                       rng.normal(0.0, std, size=(num_items, dim)), float(scale), seed, float(bias))


def sample_interactions(world: LatentWorld, per_user_count: int, rng: np.random.Generator) -> InteractionDataset:
    """Give every user ``per_user_count`` distinct items, drawn without replacement with
    probability proportional to their interaction probability.

    ``per_user_count == 0`` yields no rows, which :class:`InteractionDataset`
    rejects with :class:`~ahns.errors.EmptyDatasetError`.
    """
    if not 0 <= per_user_count <= world.num_items:
        raise ValueError("per_user_count must lie in [0, num_items]")
    users, items = [], []
    for start in range(0, world.num_users, 512):
        probs = world.probabilities(np.arange(start, min(start + 512, world.num_users)))
        for row, p in enumerate(probs):
            chosen = rng.choice(world.num_items, size=per_user_count, replace=False, p=p / p.sum())
            users.append(np.full(per_user_count, start + row))
            items.append(chosen)
    users = np.concatenate(users) if users else np.zeros(0, np.int64)
    items = np.concatenate(items) if items else np.zeros(0, np.int64)
    return InteractionDataset(world.num_users, world.num_items, users, items)


def generate_dataset(num_users: int, num_items: int, dim: int, scale: float, per_user_count: int,
                     seed: int = 0, bias: float = 0.0) -> InteractionDataset:
    world = generate_world(num_users, num_items, dim, scale, seed, bias)
    return sample_interactions(world, per_user_count, np.random.default_rng([seed, 1]))
