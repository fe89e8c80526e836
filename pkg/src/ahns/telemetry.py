"""Per-epoch training telemetry: negative hardness, false negatives, timing.

Reports are written as CSV or JSON with a fixed column order::

    epoch,mean_loss,hard_mean,hard_median,hard_p10,hard_p90,hard_defined_frac,
    fn_rate,recall20,ndcg20,ndcg50,seconds

Absent values are empty cells in CSV and ``null`` in JSON. Hardness
statistics average over training triples, not over users.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ahns.data import InteractionDataset, PairIndex
from ahns.evaluation import rank_from_scores
from ahns.model import EmbeddingModel
from ahns.samplers import NegativeBatch, SampledNegative

REPORT_FIELDS = ("epoch", "mean_loss", "hard_mean", "hard_median", "hard_p10", "hard_p90",
                 "hard_defined_frac", "fn_rate", "recall20", "ndcg20", "ndcg50", "seconds")
_METRIC_COLUMNS = {"recall@20": "recall20", "ndcg@20": "ndcg20", "ndcg@50": "ndcg50"}


@dataclass
class EpochTelemetry:
    epoch: int
    mean_loss: float | None = None
    hard_mean: float | None = None
    hard_median: float | None = None
    hard_p10: float | None = None
    hard_p90: float | None = None
    hard_defined_frac: float | None = None
    fn_rate: float | None = None
    recall20: float | None = None
    ndcg20: float | None = None
    ndcg50: float | None = None
    seconds: float | None = None
    # not part of the report schema
    num_batches: int = field(default=0, compare=False)
    num_selections: int = field(default=0, compare=False)
    clamped_bases: int = field(default=0, compare=False)
    fpp_rate: float | None = field(default=None, compare=False)
    selected_keys: np.ndarray | None = field(default=None, compare=False, repr=False)

    def record(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}

    def set_metrics(self, metrics: dict[str, float] | None) -> None:
        for name, col in _METRIC_COLUMNS.items():
            if metrics and name in metrics:
                setattr(self, col, float(metrics[name]))


class TelemetryAccumulator:
    """Collects per-triple selection data for one epoch.

    ``held_out`` holds the user's non-train positives (test, optionally
    validation); a selected negative found there counts as a false negative.
    """

    def __init__(self, held_out: PairIndex | None = None, num_items: int | None = None,
                 track_selected: bool = False):
        self.held_out = held_out
        self.num_items = num_items if num_items is not None else (held_out.num_items if held_out else None)
        self.track_selected = track_selected
        if track_selected and self.num_items is None:
            raise ValueError("tracking selected negatives needs num_items")
        self.reset()

    def reset(self) -> None:
        self._hardness: list[np.ndarray] = []
        self._loss_sum = 0.0
        self._loss_n = 0
        self._n = 0
        self._fn = 0
        self._clamped = 0
        self._batches = 0
        self._selected: list[np.ndarray] = []

    def record_selection(self, u: int, i_pos: int, neg: SampledNegative, loss: float | None = None) -> None:
        h = np.array([np.nan if neg.hardness_at_selection is None else neg.hardness_at_selection])
        self._record(np.array([u]), np.array([neg.item_id]), h, np.array([neg.base_clamped]),
                     None if loss is None else np.array([loss]))

    def record_batch(self, users, batch: NegativeBatch, losses=None) -> None:
        clamped = batch.base_clamped if batch.base_clamped is not None else np.zeros(len(batch), dtype=bool)
        self._record(np.asarray(users), batch.items, batch.hardness, clamped, losses)
        self._batches += 1

    def _record(self, users, items, hard, clamped, losses):
        self._n += users.size
        self._hardness.append(np.asarray(hard, dtype=np.float64))
        self._clamped += int(np.count_nonzero(clamped))
        if losses is not None:
            self._loss_sum += float(np.sum(losses, dtype=np.float64))
            self._loss_n += int(np.size(losses))
        if self.held_out is not None:
            self._fn += int(np.count_nonzero(self.held_out.contains(users, items)))
        if self.track_selected:
            self._selected.append(np.asarray(users, np.int64) * self.num_items + np.asarray(items, np.int64))

    def merge(self, other: "TelemetryAccumulator") -> None:
        self._hardness.extend(other._hardness)
        self._loss_sum += other._loss_sum
        self._loss_n += other._loss_n
        self._n += other._n
        self._fn += other._fn
        self._clamped += other._clamped
        self._batches += other._batches
        self._selected.extend(other._selected)

    def selected_keys(self) -> np.ndarray:
        if not self._selected:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(self._selected))

    def finalize_epoch(self, epoch: int, metrics: dict[str, float] | None = None,
                       seconds: float | None = None) -> EpochTelemetry:
        """Summarise the epoch and reset the accumulator."""
        t = EpochTelemetry(epoch=epoch, seconds=seconds, num_batches=self._batches,
                           num_selections=self._n, clamped_bases=self._clamped)
        if self._n:
            h = np.concatenate(self._hardness)
            h = h[~np.isnan(h)]
            t.mean_loss = self._loss_sum / self._loss_n if self._loss_n else None
            t.hard_defined_frac = h.size / self._n
            t.fn_rate = self._fn / self._n
            if h.size:
                t.hard_mean = float(np.mean(h))
                t.hard_p10, t.hard_median, t.hard_p90 = (float(x) for x in np.percentile(h, [10, 50, 90]))
        t.set_metrics(metrics)
        self.reset()
        return t


def record_selection(acc: TelemetryAccumulator, u: int, i_pos: int, neg: SampledNegative) -> None:
    acc.record_selection(u, i_pos, neg)


def finalize_epoch(acc: TelemetryAccumulator, epoch: int, metrics=None, wall_clock=None) -> EpochTelemetry:
    return acc.finalize_epoch(epoch, metrics, wall_clock)


def fpp_rate(model: EmbeddingModel, train: InteractionDataset, held_out: PairIndex | None,
             selected_keys: np.ndarray, k: int = 20) -> float:
    """Share of top-``k`` recommendations that are unlabelled items never used as a negative.

    Over all users, counts recommended items that are neither train nor
    held-out positives and were not selected as that user's negative during
    the epoch. High values mean high-scored uninteresting items are left
    unchallenged.
    """
    total = 0
    stale = 0
    n_items = train.num_items
    for start in range(0, train.num_users, 1024):
        users = np.arange(start, min(start + 1024, train.num_users))
        scores = model.user_scores(users)
        for row, u in enumerate(users):
            top = rank_from_scores(scores[row], train.positives(int(u)))[:k]
            if top.size == 0:
                continue
            unlabelled = ~held_out.contains(np.full(top.size, u), top) if held_out is not None else np.ones(top.size, bool)
            keys = u * n_items + top
            pos = np.searchsorted(selected_keys, keys)
            seen = np.zeros(top.size, dtype=bool)
            ok = pos < selected_keys.size
            seen[ok] = selected_keys[pos[ok]] == keys[ok]
            total += top.size
            stale += int(np.count_nonzero(unlabelled & ~seen))
    return stale / total if total else 0.0


def trend_slope(values: Sequence[float | None], window_fraction: float = 0.5) -> float:
    """Least-squares slope per epoch over the trailing ``window_fraction`` of the series.

    ``None``/NaN entries inside the window are dropped but keep their epoch position.
    """
    n = len(values)
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    start = n - max(int(math.ceil(window_fraction * n)), 0)
    x = np.arange(start, n, dtype=np.float64)
    y = np.array([np.nan if v is None else float(v) for v in values[start:]], dtype=np.float64)
    keep = ~np.isnan(y)
    x, y = x[keep], y[keep]
    if x.size < 2:
        raise ValueError("trend_slope needs at least 2 points in the window")
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def report_csv(records: Sequence[EpochTelemetry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, k)) for k in REPORT_FIELDS])
    return buf.getvalue()


def report_json(records: Sequence[EpochTelemetry], meta: dict | None = None) -> str:
    doc = {"schema": list(REPORT_FIELDS), "epochs": [r.record() for r in records]}
    if meta is not None:
        doc["meta"] = meta
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def emit_run_report(records: Sequence[EpochTelemetry], path, format: str = "csv", meta: dict | None = None) -> Path:
    """Write one row per epoch; ``format`` is ``"csv"`` or ``"json"``."""
    if format == "csv":
        text = report_csv(records)
    elif format == "json":
        text = report_json(records, meta)
    else:
        raise ValueError(f"unknown report format {format!r}")
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def load_run_report(path, format: str | None = None) -> list[EpochTelemetry]:
    path = Path(path)
    format = format or path.suffix.lstrip(".")
    text = path.read_text(encoding="utf-8")
    if format == "json":
        doc = json.loads(text)
        rows = doc["epochs"]
    elif format == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != REPORT_FIELDS:
            raise ValueError(f"{path}: columns do not match the telemetry schema")
        rows = [{k: (None if v == "" else v) for k, v in r.items()} for r in reader]
    else:
        raise ValueError(f"unknown report format {format!r}")
    out = []
    for r in rows:
        vals = {k: (None if r[k] is None else float(r[k])) for k in REPORT_FIELDS[1:]}
        out.append(EpochTelemetry(epoch=int(r["epoch"]), **vals))
    return out
