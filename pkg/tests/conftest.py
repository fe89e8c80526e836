import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ahns.config import RunConfig  # noqa: E402
from ahns.data import InteractionDataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    # 5 users, 8 items, varied degrees
    pairs = [(0, 0), (0, 1), (0, 2), (1, 2), (1, 3), (2, 0), (2, 4), (2, 5), (2, 6),
             (3, 7), (4, 1), (4, 3), (4, 5)]
    return InteractionDataset.from_pairs(pairs, num_users=5, num_items=8)


@pytest.fixture
def tiny_config(tmp_path):
    cfg = RunConfig()
    cfg.synth.num_users, cfg.synth.num_items, cfg.synth.per_user = 60, 80, 12
    cfg.synth.dim = 4
    cfg.model.dim = 8
    cfg.training.epochs = 2
    cfg.training.batch_size = 128
    cfg.optimizer.lr = 0.01
    cfg.sampler = cfg.sampler.from_dict({**cfg.sampler.to_dict(), "kind": "ahns", "m": 4})
    cfg.eval.every = 1
    cfg.output_dir = str(tmp_path / "run")
    return cfg


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
