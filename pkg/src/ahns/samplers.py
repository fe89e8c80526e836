"""Negative samplers for pairwise ranking.

Every strategy answers the same question: given a positive pair
``(u, i_pos)`` and the current model, which uninteracted item should serve
as the negative? The two-pass strategies (DNS, DNS(M, N), AHNS) first draw
``M`` uniform candidates and then apply a selection rule; RNS and PNS draw
directly from a static distribution.

All batch paths are vectorised over rows. Ties are always broken towards
the lowest item id.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from ahns.data import InteractionDataset
from ahns.errors import ExhaustedItemsError, SamplerError
from ahns.model import EmbeddingModel

HARDNESS_EPS = 1e-6
BASE_EPS = 1e-6
MAX_REJECTION_ROUNDS = 32


class SamplerKind(str, enum.Enum):
    RNS = "rns"
    PNS = "pns"
    DNS = "dns"
    DNS_MN = "dns_mn"
    AHNS = "ahns"


@dataclass(frozen=True)
class SamplerSpec:
    """Sampler choice plus its hyperparameters.

    ``m`` is the candidate count of the two-pass samplers, ``gamma`` the PNS
    popularity exponent, ``n`` the DNS(M, N) pool size and ``alpha``,
    ``beta``, ``p`` the AHNS shift, scale and exponent.
    """

    kind: SamplerKind = SamplerKind.RNS
    m: int = 1
    gamma: float = 1.0
    n: int = 1
    alpha: float = 1.0
    beta: float = 0.1
    p: float = -2.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SamplerKind(self.kind))
        except ValueError:
            raise SamplerError(f"unknown sampler kind {self.kind!r}") from None
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        for name in ("gamma", "alpha", "beta", "p"):
            object.__setattr__(self, name, float(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.m < 1:
            raise SamplerError("m must be >= 1")
        if self.kind is SamplerKind.DNS_MN and not 1 <= self.n <= self.m:
            raise SamplerError("dns_mn requires 1 <= n <= m")
        if self.kind is SamplerKind.PNS and self.gamma < 0:
            raise SamplerError("pns requires gamma >= 0")
        if self.kind is SamplerKind.AHNS:
            if self.alpha <= 0 or self.beta <= 0:
                raise SamplerError("ahns requires alpha > 0 and beta > 0")
            if self.p >= 0:
                raise SamplerError("ahns requires p < 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerSpec":
        known = {"kind", "m", "gamma", "n", "alpha", "beta", "p"}
        unknown = set(d) - known
        if unknown:
            raise SamplerError(f"unknown sampler keys {sorted(unknown)}")
        return cls(**d)

    @property
    def label(self) -> str:
        k = self.kind
        if k is SamplerKind.RNS:
            return "rns"
        if k is SamplerKind.PNS:
            return f"pns(gamma={self.gamma:g})"
        if k is SamplerKind.DNS:
            return f"dns(m={self.m})"
        if k is SamplerKind.DNS_MN:
            return f"dns_mn(m={self.m},n={self.n})"
        return f"ahns(m={self.m},alpha={self.alpha:g},beta={self.beta:g},p={self.p:g})"


@dataclass
class SampledNegative:
    item_id: int
    score_at_selection: float
    hardness_at_selection: float | None
    candidate_count_used: int
    positive_score: float = float("nan")
    candidates: np.ndarray | None = field(default=None, repr=False)
    base_clamped: bool = False


@dataclass
class NegativeBatch:
    """Row-aligned selection results for a batch of positive pairs.

    ``hardness`` is NaN where it is undefined (positive score not above
    ``HARDNESS_EPS``).
    """

    items: np.ndarray
    neg_scores: np.ndarray
    pos_scores: np.ndarray
    hardness: np.ndarray
    candidate_count: int
    candidates: np.ndarray | None = None
    base_clamped: np.ndarray | None = None

    def __len__(self):
        return int(self.items.size)

    def row(self, k: int) -> SampledNegative:
        h = self.hardness[k]
        return SampledNegative(
            int(self.items[k]), float(self.neg_scores[k]), None if np.isnan(h) else float(h),
            self.candidate_count, float(self.pos_scores[k]),
            None if self.candidates is None else self.candidates[k].copy(),
            bool(self.base_clamped[k]) if self.base_clamped is not None else False)


def hardness(s_neg, s_pos):
    """Ratio of negative to positive score; ``None`` (NaN for arrays) when ``s_pos <= 1e-6``."""
    s_neg = np.asarray(s_neg, dtype=np.float64)
    s_pos = np.asarray(s_pos, dtype=np.float64)
    if s_neg.ndim == 0 and s_pos.ndim == 0:
        return float(s_neg / s_pos) if s_pos > HARDNESS_EPS else None
    ok = s_pos > HARDNESS_EPS
    out = np.full(np.broadcast(s_neg, s_pos).shape, np.nan)
    np.divide(s_neg, s_pos, out=out, where=ok)
    return out


def ideal_hardness(s_pos, alpha: float, beta: float, p: float):
    """Hardness ``beta * (s_pos + alpha) ** p`` of the exact AHNS target.

    This is the target score divided by the shifted positive score; it is
    what the selection rule would hit given an unlimited candidate pool.
    """
    base = np.asarray(s_pos, dtype=np.float64) + alpha
    if np.any(base <= 0):
        raise ValueError("ideal_hardness requires s_pos + alpha > 0")
    out = beta * np.power(base, p)
    return float(out) if out.ndim == 0 else out


def ahns_target(s_pos, alpha: float, beta: float, p: float):
    """Score ``beta * max(s_pos + alpha, 1e-6) ** (p + 1)`` the AHNS rule aims for."""
    base = np.maximum(np.asarray(s_pos, dtype=np.float64) + alpha, BASE_EPS)
    return beta * np.power(base, p + 1.0)


def ahns_rating(s_cand, s_pos, alpha: float, beta: float, p: float):
    """Distance of a candidate score from the AHNS target; smaller is better."""
    out = np.abs(np.asarray(s_cand, dtype=np.float64) - ahns_target(s_pos, alpha, beta, p))
    return float(out) if out.ndim == 0 else out


class AliasTable:
    """Walker/Vose alias table: O(n) build, O(1) draws."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must not all be zero")
        n = w.size
        scaled = w / total * n
        prob = np.ones(n)
        alias = np.arange(n)
        small = [k for k in range(n) if scaled[k] < 1.0]
        large = [k for k in range(n) if scaled[k] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding, except zero-weight items stranded by it
        for k in small + large:
            prob[k] = 1.0 if w[k] > 0 else 0.0
            if w[k] == 0:
                alias[k] = int(np.argmax(w))
        self.prob = prob
        self.alias = alias
        self.weights = w

    def __len__(self):
        return self.prob.size

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        k = rng.integers(0, self.prob.size, size=size)
        coin = rng.random(size=size)
        return np.where(coin < self.prob[k], k, self.alias[k])


class NegativeSampler:
    """A :class:`SamplerSpec` bound to the training positives it must avoid."""

    def __init__(self, spec: SamplerSpec, train: InteractionDataset):
        spec.validate()
        self.spec = spec
        self.train = train
        self.num_items = train.num_items
        self.index = train.index()
        self.degree = train.user_degree()
        self.alias: AliasTable | None = None
        if spec.kind is SamplerKind.PNS:
            self.begin_epoch()

    def begin_epoch(self) -> None:
        """Rebuild per-epoch read-only state (the PNS alias table)."""
        if self.spec.kind is not SamplerKind.PNS:
            return
        pop = self.train.item_popularity.astype(np.float64)
        w = np.power(pop, self.spec.gamma)
        self._pns_weights = w
        self._pns_total = w.sum()
        # weight each user cannot draw because it belongs to their positives
        per_item = w[self.train.items]
        self._pns_blocked = np.zeros(self.train.num_users)
        np.add.at(self._pns_blocked, self.train.users, per_item)
        self.alias = AliasTable(w) if self._pns_total > 0 else None

    # ---- first pass -------------------------------------------------
    def candidates(self, users, m: int, rng: np.random.Generator) -> np.ndarray:
        """``(len(users), m)`` items drawn uniformly with replacement from each user's non-positives."""
        users = np.asarray(users, dtype=np.int64)
        if users.size and np.any(self.degree[users] >= self.num_items):
            bad = int(users[np.argmax(self.degree[users] >= self.num_items)])
            raise ExhaustedItemsError(f"user {bad} has interacted with every item")
        uu = np.repeat(users[:, None], m, axis=1)
        out = rng.integers(0, self.num_items, size=uu.shape)
        bad = self.index.contains(uu, out)
        rounds = 0
        while bad.any() and rounds < MAX_REJECTION_ROUNDS:
            out[bad] = rng.integers(0, self.num_items, size=int(bad.sum()))
            bad[bad] = self.index.contains(uu[bad], out[bad])
            rounds += 1
        if bad.any():
            for r, c in zip(*np.nonzero(bad)):
                allowed = np.setdiff1d(np.arange(self.num_items), self.train.positives(int(uu[r, c])),
                                       assume_unique=True)
                out[r, c] = allowed[rng.integers(0, allowed.size)]
        return out

    def _pns_draw(self, users, rng) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        out = np.empty(users.size, dtype=np.int64)
        uniform = (self._pns_total - self._pns_blocked[users]) <= 1e-12 * max(self._pns_total, 1.0)
        if uniform.any():
            out[uniform] = self.candidates(users[uniform], 1, rng)[:, 0]
        pending = np.nonzero(~uniform)[0]
        if pending.size == 0:
            return out
        draw = self.alias.sample(rng, pending.size)
        bad = self.index.contains(users[pending], draw)
        rounds = 0
        while bad.any() and rounds < MAX_REJECTION_ROUNDS:
            draw[bad] = self.alias.sample(rng, int(bad.sum()))
            bad[bad] = self.index.contains(users[pending][bad], draw[bad])
            rounds += 1
        for k in np.nonzero(bad)[0]:
            w = self._pns_weights.copy()
            w[self.train.positives(int(users[pending[k]]))] = 0.0
            draw[k] = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
        out[pending] = draw
        return out

    # ---- second pass ------------------------------------------------
    def sample_batch(self, users, pos_items, model: EmbeddingModel, rng: np.random.Generator) -> NegativeBatch:
        users = np.asarray(users, dtype=np.int64)
        pos_items = np.asarray(pos_items, dtype=np.int64)
        spec = self.spec
        s_pos = model.score_pairs(users, pos_items)
        clamped = None
        if spec.kind is SamplerKind.RNS:
            cands = self.candidates(users, 1, rng)
            items = cands[:, 0]
            s_neg = model.score_pairs(users, items)
            count = 1
        elif spec.kind is SamplerKind.PNS:
            items = self._pns_draw(users, rng)
            cands = items[:, None]
            s_neg = model.score_pairs(users, items)
            count = 1
        else:
            cands = self.candidates(users, spec.m, rng)
            scores = model.score_pairs(users, cands)
            count = spec.m
            if spec.kind is SamplerKind.DNS:
                items, s_neg = select_max(cands, scores)
            elif spec.kind is SamplerKind.DNS_MN:
                items, s_neg = select_top_n_uniform(cands, scores, spec.n, rng)
            else:
                clamped = (s_pos + spec.alpha) < BASE_EPS
                ratings = np.abs(scores - ahns_target(s_pos, spec.alpha, spec.beta, spec.p)[:, None])
                items, s_neg = select_min_rating(cands, ratings, scores)
        return NegativeBatch(items, s_neg, s_pos, hardness(s_neg, s_pos), count, cands, clamped)

    def sample(self, u: int, i_pos: int, model: EmbeddingModel, rng: np.random.Generator) -> SampledNegative:
        return self.sample_batch(np.array([u]), np.array([i_pos]), model, rng).row(0)


def select_max(cands: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmax of ``scores``; ties go to the lowest item id."""
    best = scores.max(axis=1)
    hit = scores == best[:, None]
    items = np.where(hit, cands, np.iinfo(np.int64).max).min(axis=1)
    return items, best


def select_min_rating(cands: np.ndarray, ratings: np.ndarray, scores: np.ndarray):
    """Row-wise argmin of ``ratings``; ties go to the lowest item id. Returns items and their scores."""
    best = ratings.min(axis=1)
    hit = ratings == best[:, None]
    items = np.where(hit, cands, np.iinfo(np.int64).max).min(axis=1)
    col = np.argmax(hit & (cands == items[:, None]), axis=1)
    return items, scores[np.arange(cands.shape[0]), col]


def select_top_n_uniform(cands: np.ndarray, scores: np.ndarray, n: int, rng: np.random.Generator):
    """Keep each row's ``n`` best-scored candidates (ties by lowest id) and pick one uniformly."""
    if n == 1:
        return select_max(cands, scores)
    order = np.lexsort((cands, -scores), axis=1)
    pick = order[np.arange(cands.shape[0]), rng.integers(0, n, size=cands.shape[0])]
    rows = np.arange(cands.shape[0])
    return cands[rows, pick], scores[rows, pick]


def make_sampler(spec: SamplerSpec, train: InteractionDataset) -> NegativeSampler:
    return NegativeSampler(spec, train)


def sample_candidates(u: int, m: int, rng: np.random.Generator, dataset: InteractionDataset) -> np.ndarray:
    return NegativeSampler(SamplerSpec(SamplerKind.RNS), dataset).candidates(np.array([u]), m, rng)[0]


def _single(kind: SamplerKind):
    def run(u, i_pos, model, spec: SamplerSpec, rng, dataset: InteractionDataset) -> SampledNegative:
        if spec.kind is not kind:
            raise SamplerError(f"expected a {kind.value} spec, got {spec.kind.value}")
        return NegativeSampler(spec, dataset).sample(u, i_pos, model, rng)
    run.__name__ = f"{kind.value}_sample"
    run.__doc__ = f"Draw one {kind.value.upper()} negative for ``(u, i_pos)``. Builds a throwaway sampler; use :class:`NegativeSampler` in loops."
    return run


rns_sample = _single(SamplerKind.RNS)
pns_sample = _single(SamplerKind.PNS)
dns_sample = _single(SamplerKind.DNS)
dns_mn_sample = _single(SamplerKind.DNS_MN)
ahns_select = _single(SamplerKind.AHNS)
