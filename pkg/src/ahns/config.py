"""Run configuration: a flat INI file with one section per module.

Example::

    [data]
    source = synth
    test_frac = 0.2
    val_frac_of_train = 0.1
    split_seed = 0

    [synth]
    num_users = 1000
    num_items = 1000
    dim = 16
    scale = 2.0
    bias = -6.0
    per_user = 40
    seed = 0

    [model]
    dim = 64
    init_seed = 0

    [optimizer]
    lr = 0.001

    [training]
    epochs = 100
    batch_size = 2048
    deterministic = true

    [sampler]
    kind = ahns
    m = 16
    alpha = 1.0
    beta = 0.1
    p = -2.0

    [eval]
    k = 20, 50
    every = 10

    [output]
    dir = runs/example

Optional ``[sweep]`` lists comma-separated values for ``alpha``, ``beta``,
``p`` and ``m``. Each optional ``[diagnose.<label>]`` section overrides
``[sampler]`` keys for one sampler of a diagnosis run.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

from ahns.errors import ConfigError, SamplerError
from ahns.samplers import SamplerSpec

SWEEP_KEYS = ("alpha", "beta", "p", "m")


@dataclass
class DataConfig:
    source: str = "synth"
    path: str = ""
    format: str = "csv"
    rating_threshold: float | None = None
    test_frac: float = 0.2
    val_frac_of_train: float = 0.1
    split_seed: int = 0


@dataclass
class SynthConfig:
    num_users: int = 1000
    num_items: int = 1000
    dim: int = 16
    scale: float = 2.0
    bias: float = -6.0
    per_user: int = 40
    seed: int = 0


@dataclass
class ModelConfig:
    dim: int = 64
    init_seed: int = 0


@dataclass
class OptimizerConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


@dataclass
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 2048
    deterministic: bool = True
    workers: int = 1
    seed: int = 0


@dataclass
class EvalConfig:
    k: tuple[int, ...] = (20, 50)
    every: int = 10
    fpp: bool = False

    @property
    def recall_ks(self) -> tuple[int, ...]:
        return (min(self.k),)

    @property
    def ndcg_ks(self) -> tuple[int, ...]:
        return tuple(self.k)


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs/default"
    sweep: dict[str, tuple] = field(default_factory=dict)
    diagnose: dict[str, SamplerSpec] = field(default_factory=dict)

    def validate(self) -> None:
        d = self.data
        if d.source not in ("synth", "file"):
            raise ConfigError(f"data.source must be 'synth' or 'file', got {d.source!r}")
        if d.source == "file" and not d.path:
            raise ConfigError("data.path is required when data.source = file")
        if not 0 < d.test_frac < 1 or not 0 <= d.val_frac_of_train < 1:
            raise ConfigError("split fractions out of range")
        if self.model.dim < 1:
            raise ConfigError("model.dim must be >= 1")
        t = self.training
        if t.epochs < 0 or t.batch_size < 1 or t.workers < 1:
            raise ConfigError("training.epochs >= 0, batch_size >= 1 and workers >= 1 required")
        if self.optimizer.lr <= 0:
            raise ConfigError("optimizer.lr must be positive")
        if not self.eval.k or min(self.eval.k) < 1 or self.eval.every < 1:
            raise ConfigError("eval.k must be positive integers and eval.every >= 1")
        for key in self.sweep:
            if key not in SWEEP_KEYS:
                raise ConfigError(f"cannot sweep over {key!r}")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for name in ("data", "synth", "model", "optimizer", "training", "eval"):
            cp[name] = {f.name: _fmt(getattr(getattr(self, name), f.name))
                        for f in dataclasses.fields(getattr(self, name))}
        cp["sampler"] = {k: _fmt(v) for k, v in self.sampler.to_dict().items()}
        cp["output"] = {"dir": self.output_dir}
        if self.sweep:
            cp["sweep"] = {k: ", ".join(_fmt(x) for x in v) for k, v in self.sweep.items()}
        for label, spec in self.diagnose.items():
            cp[f"diagnose.{label}"] = {k: _fmt(v) for k, v in spec.to_dict().items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """SHA-256 of the serialised config, ignoring where outputs are written."""
        return hashlib.sha256(dataclasses.replace(self, output_dir="").to_ini().encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(str(e)) from None
        cfg = cls()
        known = {"data", "synth", "model", "optimizer", "training", "sampler", "eval", "output", "sweep"}
        for section in cp.sections():
            if section not in known and not section.startswith("diagnose."):
                raise ConfigError(f"unknown config section [{section}]")
        for name in ("data", "synth", "model", "optimizer", "training", "eval"):
            if cp.has_section(name):
                setattr(cfg, name, _load_section(getattr(cfg, name), cp[name], name))
        base = cfg.sampler.to_dict()
        if cp.has_section("sampler"):
            cfg.sampler = _load_spec(base, cp["sampler"], "sampler")
        if cp.has_section("output"):
            cfg.output_dir = cp["output"].get("dir", cfg.output_dir)
        if cp.has_section("sweep"):
            cfg.sweep = {k: tuple(_parse_scalar(x.strip(), int if k == "m" else float, f"sweep.{k}")
                                  for x in v.split(",") if x.strip())
                         for k, v in cp["sweep"].items()}
        for section in cp.sections():
            if section.startswith("diagnose."):
                cfg.diagnose[section[len("diagnose."):]] = _load_spec(cfg.sampler.to_dict(), cp[section], section)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"{path}: no such config file")
        return cls.from_ini(path.read_text(encoding="utf-8"))


def desk_samplers(m: int = 16) -> dict[str, SamplerSpec]:
    """RNS, DNS and AHNS(p=-2) at equal candidate count, tuned for the desk world."""
    return {"rns": SamplerSpec("rns"), "dns": SamplerSpec("dns", m=m),
            "ahns": SamplerSpec("ahns", m=m, alpha=1.0, beta=8.0, p=-2.0)}


def desk_preset(**overrides) -> RunConfig:
    """Protocol scaled to one core in minutes: dim 32, 50 epochs, more frequent Adam steps.

    The sampler defaults to the desk AHNS setting and ``diagnose`` holds the
    RNS / DNS / AHNS comparison set.
    """
    cfg = RunConfig()
    cfg.model.dim = 32
    cfg.training.epochs = 50
    cfg.training.batch_size = 512
    cfg.optimizer.lr = 0.01
    cfg.eval.every = 1
    cfg.diagnose = desk_samplers()
    cfg.sampler = cfg.diagnose["ahns"]
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse_scalar(raw: str, typ, where: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}") from None


def _load_section(obj, section, name):
    hints = {f.name: f for f in dataclasses.fields(obj)}
    values = {}
    for key, raw in section.items():
        if key not in hints:
            raise ConfigError(f"unknown key {name}.{key}")
        current = getattr(obj, key)
        where = f"{name}.{key}"
        if key == "rating_threshold":
            values[key] = None if raw.strip() == "" else _parse_scalar(raw, float, where)
        elif key == "k":
            values[key] = tuple(_parse_scalar(x.strip(), int, where) for x in raw.split(",") if x.strip())
        elif isinstance(current, bool):
            values[key] = _parse_scalar(raw, bool, where)
        elif isinstance(current, int):
            values[key] = _parse_scalar(raw, int, where)
        elif isinstance(current, float):
            values[key] = _parse_scalar(raw, float, where)
        else:
            values[key] = raw
    return dataclasses.replace(obj, **values)


def _load_spec(base: dict, section, name) -> SamplerSpec:
    d = dict(base)
    for key, raw in section.items():
        if key not in d:
            raise ConfigError(f"unknown key {name}.{key}")
        if key == "kind":
            d[key] = raw.strip()
        elif key in ("m", "n"):
            d[key] = _parse_scalar(raw, int, f"{name}.{key}")
        else:
            d[key] = _parse_scalar(raw, float, f"{name}.{key}")
    try:
        return SamplerSpec.from_dict(d)
    except SamplerError as e:
        raise ConfigError(f"[{name}] {e}") from None
