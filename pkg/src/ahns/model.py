"""Matrix factorisation scoring, the BPR loss and its analytic gradients."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ahns.errors import CheckpointError

CHECKPOINT_MAGIC = b"AHNSCKPT"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIQQQI")  # magic, version, users, items, dim, crc32


@dataclass
class EmbeddingModel:
    """User and item factor matrices; ``score(u, i) = user_factors[u] @ item_factors[i]``."""

    user_factors: np.ndarray
    item_factors: np.ndarray

    def __post_init__(self):
        if self.user_factors.ndim != 2 or self.item_factors.ndim != 2:
            raise ValueError("factor matrices must be 2-D")
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise ValueError("user and item factors must share the embedding dimension")

    @property
    def dim(self) -> int:
        return self.user_factors.shape[1]

    @property
    def num_users(self) -> int:
        return self.user_factors.shape[0]

    @property
    def num_items(self) -> int:
        return self.item_factors.shape[0]

    def score(self, u: int, i: int) -> float:
        return float(np.dot(self.user_factors[u].astype(np.float64), self.item_factors[i].astype(np.float64)))

    def score_pairs(self, users, items) -> np.ndarray:
        """Scores for aligned arrays of users and items, any matching shape, in float64."""
        users = np.asarray(users)
        items = np.asarray(items)
        eu = self.user_factors[users].astype(np.float64)
        ei = self.item_factors[items].astype(np.float64)
        if eu.ndim == ei.ndim:
            return np.einsum("...d,...d->...", eu, ei)
        # (B, d) users against (B, M, d) candidates
        return np.einsum("bd,bmd->bm", eu, ei)

    def user_scores(self, users) -> np.ndarray:
        """Full score rows ``(len(users), num_items)`` in float64."""
        return self.user_factors[np.asarray(users)].astype(np.float64) @ self.item_factors.astype(np.float64).T

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.user_factors.copy(), self.item_factors.copy())


def score(model: EmbeddingModel, u: int, i: int) -> float:
    return model.score(u, i)


def xavier_init(num_users: int, num_items: int, dim: int, seed: int = 0,
                dtype=np.float32) -> EmbeddingModel:
    """Xavier-uniform factors on ``[-sqrt(6 / (2 dim)), sqrt(6 / (2 dim))]``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    bound = np.sqrt(6.0 / (dim + dim))
    rng = np.random.default_rng(seed)
    users = rng.uniform(-bound, bound, size=(num_users, dim)).astype(dtype)
    items = rng.uniform(-bound, bound, size=(num_items, dim)).astype(dtype)
    # narrowing may round past the bound
    b = dtype(bound)
    if b > bound:
        b = np.nextafter(b, dtype(0))
    return EmbeddingModel(np.clip(users, -b, b), np.clip(items, -b, b))


def softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bpr_loss(s_pos, s_neg):
    """``-ln sigmoid(s_pos - s_neg)``, evaluated as ``softplus(s_neg - s_pos)``."""
    out = softplus(np.asarray(s_neg, dtype=np.float64) - np.asarray(s_pos, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def bpr_gradients(e_u, e_pos, e_neg):
    """Gradients of the BPR loss of one triple w.r.t. the three embeddings.

    Works row-wise on ``(B, d)`` arrays as well as single vectors.
    """
    e_u = np.asarray(e_u, dtype=np.float64)
    e_pos = np.asarray(e_pos, dtype=np.float64)
    e_neg = np.asarray(e_neg, dtype=np.float64)
    diff = np.sum(e_u * (e_neg - e_pos), axis=-1)
    c = sigmoid(diff)[..., None]
    return c * (e_neg - e_pos), -c * e_u, c * e_u


def save_checkpoint(model: EmbeddingModel, path) -> None:
    """Binary checkpoint: fixed little-endian header, then both float32 matrices row-major.

    The header stores (users, items, dim, format version) and a CRC32 of the
    payload so truncation and bit rot are detected on load.
    """
    payload = (np.ascontiguousarray(model.user_factors, dtype="<f4").tobytes()
               + np.ascontiguousarray(model.item_factors, dtype="<f4").tobytes())
    header = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, model.num_users, model.num_items,
                          model.dim, zlib.crc32(payload))
    Path(path).write_bytes(header + payload)


def load_checkpoint(path) -> EmbeddingModel:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, nu, ni, dim, crc = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    payload = blob[_HEADER.size:]
    if len(payload) != 4 * dim * (nu + ni):
        raise CheckpointError(f"{path}: payload size does not match header")
    if zlib.crc32(payload) != crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    return EmbeddingModel(flat[:nu * dim].reshape(nu, dim).copy(), flat[nu * dim:].reshape(ni, dim).copy())
