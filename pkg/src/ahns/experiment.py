"""End-to-end runs: data, split, init, epoch loop, evaluation schedule, run directory."""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ahns import __version__
from ahns.config import RunConfig
from ahns.errors import AHNSError
from ahns.data import InteractionDataset, SplitManifest, parse_interactions, save_manifest, split_dataset
from ahns.evaluation import evaluate, write_metrics_report
from ahns.model import EmbeddingModel, save_checkpoint, xavier_init
from ahns.optim import AdamState
from ahns.samplers import NegativeSampler, SamplerSpec
from ahns.synth import generate_dataset
from ahns.telemetry import EpochTelemetry, TelemetryAccumulator, emit_run_report, fpp_rate, trend_slope
from ahns.training import train_epoch

log = logging.getLogger("ahns")

DIAGNOSE_SERIES = ("mean_loss", "hard_mean", "hard_median", "hard_p10", "hard_p90", "hard_defined_frac",
                   "fn_rate", "recall20", "ndcg20", "ndcg50", "fpp_rate", "seconds")


@dataclass
class RunResult:
    config: RunConfig
    manifest: SplitManifest
    model: EmbeddingModel
    telemetry: list[EpochTelemetry]
    final_metrics: dict[str, float]
    metric_records: list[tuple[int, str, float]] = field(default_factory=list)

    def series(self, name: str) -> list:
        return [getattr(t, name) for t in self.telemetry]


def load_dataset(cfg: RunConfig) -> InteractionDataset:
    d = cfg.data
    if d.source == "file":
        return parse_interactions(d.path, d.format, d.rating_threshold)
    s = cfg.synth
    return generate_dataset(s.num_users, s.num_items, s.dim, s.scale, s.per_user, seed=s.seed, bias=s.bias)


def prepare_split(cfg: RunConfig, dataset: InteractionDataset | None = None) -> SplitManifest:
    ds = dataset if dataset is not None else load_dataset(cfg)
    return split_dataset(ds, cfg.data.test_frac, cfg.data.val_frac_of_train, cfg.data.split_seed)


def run_training(cfg: RunConfig, manifest: SplitManifest | None = None, track_fpp: bool | None = None) -> RunResult:
    """Train one model under ``cfg`` and evaluate it on the test split on schedule.

    Evaluation happens every ``cfg.eval.every`` epochs and always after the
    last one. ``track_fpp`` (default ``cfg.eval.fpp``) also records the
    stale-recommendation rate at each evaluation.
    """
    cfg.validate()
    manifest = manifest if manifest is not None else prepare_split(cfg)
    train = manifest.dataset("train")
    test = manifest.dataset("test")
    if train is None:
        raise ValueError("training split is empty")
    track_fpp = cfg.eval.fpp if track_fpp is None else track_fpp

    model = xavier_init(manifest.num_users, manifest.num_items, cfg.model.dim, seed=cfg.model.init_seed)
    o = cfg.optimizer
    opt = AdamState(lr=o.lr, beta1=o.beta1, beta2=o.beta2, eps=o.eps, weight_decay=o.weight_decay)
    sampler = NegativeSampler(cfg.sampler, train)
    held_out = test.index() if test is not None else None
    acc = TelemetryAccumulator(held_out, manifest.num_items, track_selected=track_fpp)
    rng = np.random.default_rng(cfg.training.seed)
    workers = 1 if cfg.training.deterministic else cfg.training.workers
    pairs = train.pairs()

    records: list[EpochTelemetry] = []
    metric_rows: list[tuple[int, str, float]] = []
    metrics: dict[str, float] = {}
    for epoch in range(cfg.training.epochs):
        t = train_epoch(model, pairs, sampler, opt, cfg.training.batch_size, rng, acc, epoch=epoch, workers=workers)
        last = epoch == cfg.training.epochs - 1
        if test is not None and ((epoch + 1) % cfg.eval.every == 0 or last):
            metrics = evaluate(model, train, test, cfg.eval.recall_ks, cfg.eval.ndcg_ks)
            t.set_metrics(metrics)
            metric_rows.extend((epoch, k, v) for k, v in metrics.items())
            if track_fpp:
                t.fpp_rate = fpp_rate(model, train, held_out, t.selected_keys, k=min(cfg.eval.k))
                metric_rows.append((epoch, f"fpp@{min(cfg.eval.k)}", t.fpp_rate))
        t.selected_keys = None
        records.append(t)
        log.info("epoch %d loss=%s hard=%s fn=%s %s", epoch, _f(t.mean_loss), _f(t.hard_mean), _f(t.fn_rate),
                 " ".join(f"{k}={v:.4f}" for k, v in metrics.items()) if metrics and t.ndcg20 is not None else "")
    if test is not None and cfg.training.epochs == 0:
        metrics = evaluate(model, train, test, cfg.eval.recall_ks, cfg.eval.ndcg_ks)
        metric_rows.extend((-1, k, v) for k, v in metrics.items())
    return RunResult(cfg, manifest, model, records, metrics, metric_rows)


def _f(v) -> str:
    return "-" if v is None else f"{v:.4f}"


def run_header(cfg: RunConfig) -> dict:
    return {"version": __version__, "config_sha256": cfg.digest(), "seed": cfg.training.seed,
            "split_seed": cfg.data.split_seed, "init_seed": cfg.model.init_seed,
            "sampler": cfg.sampler.to_dict(), "deterministic": cfg.training.deterministic}


def write_run(result: RunResult, out_dir) -> Path:
    """Lay out a run directory.

    Files: ``config.ini``, ``run.json`` (version, config hash, seeds, final
    metrics), ``manifest.txt``, ``checkpoint.bin``, ``telemetry.csv`` /
    ``telemetry.json``, ``timing.csv``, ``metrics.csv`` / ``metrics.json``.
    Deterministic runs leave ``seconds`` empty in the telemetry reports so
    those stay byte-identical; wall-clock times always go to ``timing.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    header = run_header(cfg)
    cfg.save(out / "config.ini")
    save_manifest(result.manifest, out / "manifest.txt")
    save_checkpoint(result.model, out / "checkpoint.bin")
    records = result.telemetry
    if cfg.training.deterministic:
        records = [dataclasses.replace(t, seconds=None) for t in records]
    emit_run_report(records, out / "telemetry.csv", "csv")
    emit_run_report(records, out / "telemetry.json", "json", meta=header)
    with (out / "timing.csv").open("w", encoding="utf-8") as f:
        f.write("epoch,seconds\n")
        f.writelines(f"{t.epoch},{t.seconds!r}\n" for t in result.telemetry)
    write_metrics_report(result.metric_records, out / "metrics.json", out / "metrics.csv")
    (out / "run.json").write_text(json.dumps({**header, "final_metrics": result.final_metrics}, indent=2) + "\n",
                                  encoding="utf-8")
    return out


def with_sampler(cfg: RunConfig, spec: SamplerSpec) -> RunConfig:
    c = copy.deepcopy(cfg)
    c.sampler = spec
    return c


def diagnose(cfg: RunConfig, window_fraction: float = 0.5) -> tuple[dict, dict[str, RunResult]]:
    """Train every ``[diagnose.*]`` sampler on the same split and seeds, evaluating each epoch."""
    if len(cfg.diagnose) < 2:
        raise AHNSError("diagnose needs at least two [diagnose.<label>] sections")
    manifest = prepare_split(cfg)
    report = {"window_fraction": window_fraction, "samplers": {}}
    results = {}
    for label, spec in cfg.diagnose.items():
        run_cfg = with_sampler(cfg, spec)
        run_cfg.eval.every = 1
        res = run_training(run_cfg, manifest, track_fpp=True)
        results[label] = res
        series = {name: res.series(name) for name in DIAGNOSE_SERIES}
        slopes = {}
        for name in ("hard_mean", "hard_median", "ndcg20"):
            try:
                slopes[name] = trend_slope(series[name], window_fraction)
            except ValueError:
                slopes[name] = None
        report["samplers"][label] = {"sampler": spec.to_dict(), "series": series, "trend_slope": slopes,
                                     "final_metrics": res.final_metrics}
    return report, results
