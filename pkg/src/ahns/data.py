"""Interaction logs, implicit-feedback datasets and per-user splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ahns.errors import DatasetError, EmptyDatasetError, ManifestError, ParseError

FORMATS = ("movielens-dat", "movielens-tsv", "csv")
MANIFEST_MAGIC = "# ahns-split-manifest"
MANIFEST_VERSION = 1


class PairIndex:
    """Vectorised membership test for a set of (user, item) pairs.

    Pairs are encoded as ``user * num_items + item`` and kept sorted, so a
    batch lookup is a single ``searchsorted``.
    """

    def __init__(self, users, items, num_items: int):
        self.num_items = int(num_items)
        keys = np.asarray(users, dtype=np.int64) * self.num_items + np.asarray(items, dtype=np.int64)
        self.keys = np.unique(keys)

    def __len__(self) -> int:
        return int(self.keys.size)

    def contains(self, users, items) -> np.ndarray:
        q = np.asarray(users, dtype=np.int64) * self.num_items + np.asarray(items, dtype=np.int64)
        if self.keys.size == 0:
            return np.zeros(q.shape, dtype=bool)
        pos = np.searchsorted(self.keys, q)
        pos = np.minimum(pos, self.keys.size - 1)
        return self.keys[pos] == q


@dataclass
class InteractionDataset:
    """Deduplicated implicit feedback over contiguous 0-based ids.

    ``users``/``items`` hold one row per distinct (user, item) pair, sorted by
    user then item. ``user_ids``/``item_ids`` map indices back to raw ids when
    the dataset was parsed from a file.
    """

    num_users: int
    num_items: int
    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray | None = None
    user_ids: list | None = None
    item_ids: list | None = None
    _offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        if self.users.shape != self.items.shape or self.users.ndim != 1:
            raise DatasetError("users and items must be 1-D arrays of equal length")
        if self.users.size == 0:
            raise EmptyDatasetError("dataset has no interactions")
        if self.users.min() < 0 or self.users.max() >= self.num_users:
            raise DatasetError("user id out of range")
        if self.items.min() < 0 or self.items.max() >= self.num_items:
            raise DatasetError("item id out of range")
        order = np.lexsort((self.items, self.users))
        u, i = self.users[order], self.items[order]
        keep = np.ones(u.size, dtype=bool)
        keep[1:] = (u[1:] != u[:-1]) | (i[1:] != i[:-1])
        self.users, self.items = u[keep], i[keep]
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps)[order][keep]
        self._offsets = np.searchsorted(self.users, np.arange(self.num_users + 1))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], num_users: int | None = None,
                   num_items: int | None = None) -> "InteractionDataset":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        if arr.shape[0] == 0:
            raise EmptyDatasetError("dataset has no interactions")
        nu = int(arr[:, 0].max()) + 1 if num_users is None else num_users
        ni = int(arr[:, 1].max()) + 1 if num_items is None else num_items
        return cls(nu, ni, arr[:, 0], arr[:, 1])

    @property
    def num_interactions(self) -> int:
        return int(self.users.size)

    def positives(self, u: int) -> np.ndarray:
        """Sorted item ids user ``u`` interacted with."""
        return self.items[self._offsets[u]:self._offsets[u + 1]]

    @property
    def user_positives(self) -> list[np.ndarray]:
        return [self.positives(u) for u in range(self.num_users)]

    @property
    def item_popularity(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.num_items)

    def user_degree(self) -> np.ndarray:
        return np.diff(self._offsets)

    def pairs(self) -> np.ndarray:
        return np.stack([self.users, self.items], axis=1)

    def index(self) -> PairIndex:
        return PairIndex(self.users, self.items, self.num_items)


def _split_row(line: str, fmt: str) -> list[str]:
    if fmt == "movielens-dat":
        return line.split("::")
    if fmt == "movielens-tsv":
        return line.split("\t")
    raise ValueError(fmt)


def parse_interactions(path, format: str = "csv", rating_threshold: float | None = None) -> InteractionDataset:
    """Read an interaction log into an :class:`InteractionDataset`.

    Every retained row is treated as a positive. With ``rating_threshold`` set,
    rows whose rating is below it are dropped. Raw ids are remapped to
    contiguous indices in order of first appearance.

    Supported layouts are MovieLens ``::``-delimited ``.dat`` files,
    MovieLens tab-separated ``.data`` files and CSV files with a header
    ``user,item[,rating][,timestamp]``.
    """
    if format not in FORMATS:
        raise ParseError(f"unknown format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")

    rows: list[tuple[str, str, float | None, str | None]] = []
    with path.open(newline="", encoding="utf-8") as f:
        if format == "csv":
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise EmptyDatasetError(f"{path}: empty file")
            header = [h.strip().lower() for h in header]
            if header[:2] != ["user", "item"]:
                raise ParseError(f"{path}:1: header must start with user,item")
            extra = header[2:]
            if extra not in ([], ["rating"], ["timestamp"], ["rating", "timestamp"]):
                raise ParseError(f"{path}:1: unsupported columns {extra}")
            r_col = 2 + extra.index("rating") if "rating" in extra else None
            t_col = 2 + extra.index("timestamp") if "timestamp" in extra else None
            for lineno, rec in enumerate(reader, start=2):
                if not rec or all(not c.strip() for c in rec):
                    continue
                if len(rec) != len(header):
                    raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
                rows.append(_parse_fields(rec, r_col, t_col, path, lineno))
        else:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    continue
                rec = _split_row(line, format)
                if len(rec) < 2 or len(rec) > 4:
                    raise ParseError(f"{path}:{lineno}: expected 2-4 fields, got {len(rec)}")
                rows.append(_parse_fields(rec, 2 if len(rec) > 2 else None,
                                          3 if len(rec) > 3 else None, path, lineno))

    if rating_threshold is not None:
        if any(r[2] is None for r in rows):
            raise ParseError(f"{path}: rating_threshold given but file has no rating column")
        rows = [r for r in rows if r[2] >= rating_threshold]
    if not rows:
        raise EmptyDatasetError(f"{path}: no interactions after filtering")

    user_map: dict[str, int] = {}
    item_map: dict[str, int] = {}
    users = np.fromiter((user_map.setdefault(r[0], len(user_map)) for r in rows), dtype=np.int64, count=len(rows))
    items = np.fromiter((item_map.setdefault(r[1], len(item_map)) for r in rows), dtype=np.int64, count=len(rows))
    ts = None
    if rows[0][3] is not None:
        ts = np.array([float(r[3]) for r in rows])
    return InteractionDataset(len(user_map), len(item_map), users, items, timestamps=ts,
                              user_ids=list(user_map), item_ids=list(item_map))


def _parse_fields(rec, r_col, t_col, path, lineno):
    user, item = rec[0].strip(), rec[1].strip()
    if not user or not item:
        raise ParseError(f"{path}:{lineno}: empty user or item field")
    rating = ts = None
    try:
        if r_col is not None:
            rating = float(rec[r_col])
        if t_col is not None:
            ts = rec[t_col].strip()
            float(ts)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-numeric rating or timestamp") from None
    return user, item, rating, ts


def write_interactions_csv(ds: InteractionDataset, path) -> None:
    """Write ``ds`` in the CSV layout accepted by :func:`parse_interactions`."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["user", "item"])
        w.writerows(zip(ds.users.tolist(), ds.items.tolist()))


@dataclass
class SplitManifest:
    seed: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    test_frac: float
    val_frac_of_train: float
    num_users: int
    num_items: int

    def __post_init__(self):
        for name in ("train", "val", "test"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 2))

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (1.0 - self.test_frac, self.test_frac, self.val_frac_of_train)

    def __eq__(self, other):
        if not isinstance(other, SplitManifest):
            return NotImplemented
        return (self.seed == other.seed and self.test_frac == other.test_frac
                and self.val_frac_of_train == other.val_frac_of_train
                and self.num_users == other.num_users and self.num_items == other.num_items
                and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in ("train", "val", "test")))

    def validate(self, num_users: int, num_items: int) -> None:
        """Check every id against the bounds of the dataset this manifest is bound to."""
        for name in ("train", "val", "test"):
            arr = getattr(self, name)
            if arr.size and (arr[:, 0].min() < 0 or arr[:, 0].max() >= num_users
                             or arr[:, 1].min() < 0 or arr[:, 1].max() >= num_items):
                raise ManifestError(f"{name} split has ids outside {num_users} users x {num_items} items")

    def dataset(self, part: str) -> InteractionDataset | None:
        arr = getattr(self, part)
        if arr.size == 0:
            return None
        return InteractionDataset(self.num_users, self.num_items, arr[:, 0], arr[:, 1])


def split_dataset(ds: InteractionDataset, test_frac: float = 0.2, val_frac_of_train: float = 0.1,
                  seed: int = 0) -> SplitManifest:
    """Randomly split each user's interactions into train/validation/test.

    Per user with ``n`` interactions: shuffle, send the last
    ``ceil(test_frac * n)`` to test, then move ``round(val_frac_of_train * pool)``
    of the remaining pool to validation. Users with one interaction keep it
    in train. At least one train interaction is always retained.
    """
    if not 0 < test_frac < 1:
        raise ValueError("test_frac must lie in (0, 1)")
    if not 0 <= val_frac_of_train < 1:
        raise ValueError("val_frac_of_train must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    offsets = ds._offsets
    train, val, test = [], [], []
    for u in range(ds.num_users):
        items = ds.items[offsets[u]:offsets[u + 1]]
        n = items.size
        if n == 0:
            continue
        if n == 1:
            train.append((u, items))
            continue
        items = items[rng.permutation(n)]
        n_test = min(math.ceil(test_frac * n - 1e-9), n - 1)
        pool, held = items[:n - n_test], items[n - n_test:]
        n_val = min(int(np.floor(val_frac_of_train * pool.size + 0.5)), pool.size - 1)
        test.append((u, held))
        if n_val > 0:
            val.append((u, pool[pool.size - n_val:]))
            pool = pool[:pool.size - n_val]
        train.append((u, pool))
    return SplitManifest(seed, _stack(train), _stack(val), _stack(test), test_frac, val_frac_of_train,
                         ds.num_users, ds.num_items)


def _stack(chunks: Sequence[tuple[int, np.ndarray]]) -> np.ndarray:
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate([np.stack([np.full(it.size, u, dtype=np.int64), np.sort(it)], axis=1)
                           for u, it in chunks])


def save_manifest(manifest: SplitManifest, path) -> None:
    """Write ``manifest`` as line-oriented text.

    Layout::

        # ahns-split-manifest v1
        seed=<int>
        test_frac=<float>
        val_frac_of_train=<float>
        num_users=<int>
        num_items=<int>
        train <user> <item>
        val <user> <item>
        test <user> <item>
    """
    lines = [f"{MANIFEST_MAGIC} v{MANIFEST_VERSION}",
             f"seed={manifest.seed}",
             f"test_frac={manifest.test_frac!r}",
             f"val_frac_of_train={manifest.val_frac_of_train!r}",
             f"num_users={manifest.num_users}",
             f"num_items={manifest.num_items}"]
    for name in ("train", "val", "test"):
        lines.extend(f"{name} {u} {i}" for u, i in getattr(manifest, name).tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_HEADER_KEYS = ("seed", "test_frac", "val_frac_of_train", "num_users", "num_items")


def load_manifest(path) -> SplitManifest:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith(MANIFEST_MAGIC):
        raise ManifestError(f"{path}: missing manifest header")
    version = text[0][len(MANIFEST_MAGIC):].strip()
    if version != f"v{MANIFEST_VERSION}":
        raise ManifestError(f"{path}: unsupported manifest version {version!r}")
    header: dict[str, str] = {}
    parts: dict[str, list[tuple[int, int]]] = {"train": [], "val": [], "test": []}
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            if key not in _HEADER_KEYS:
                raise ManifestError(f"{path}:{lineno}: unknown header field {key!r}")
            header[key] = value
            continue
        fields = line.split()
        if len(fields) != 3 or fields[0] not in parts:
            raise ManifestError(f"{path}:{lineno}: malformed row")
        try:
            parts[fields[0]].append((int(fields[1]), int(fields[2])))
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: non-integer id") from None
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ManifestError(f"{path}: header missing {missing}")
    try:
        m = SplitManifest(int(header["seed"]), parts["train"], parts["val"], parts["test"],
                          float(header["test_frac"]), float(header["val_frac_of_train"]),
                          int(header["num_users"]), int(header["num_items"]))
    except ValueError:
        raise ManifestError(f"{path}: malformed header value") from None
    m.validate(m.num_users, m.num_items)
    return m
