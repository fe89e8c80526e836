"""Row-sparse Adam for embedding tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Moment accumulators for each parameter table, plus the shared step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, name: str, shape) -> None:
        if name not in self.m:
            self.m[name] = np.zeros(shape, dtype=np.float64)
            self.v[name] = np.zeros(shape, dtype=np.float64)
        elif self.m[name].shape != tuple(shape):
            raise ValueError(f"moment shape {self.m[name].shape} does not match parameter {tuple(shape)}")


def adam_step(params: dict[str, np.ndarray], grads: dict[str, tuple[np.ndarray, np.ndarray]],
              state: AdamState) -> None:
    """Apply one Adam update in place, touching only the rows a batch produced gradients for.

    ``grads[name]`` is ``(rows, row_grads)`` with unique ``rows``. Rows not
    listed keep both their parameters and their moments frozen; the step
    counter used for bias correction advances once per call.
    """
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, (rows, g) in grads.items():
        p = params[name]
        state.ensure(name, p.shape)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (len(rows),) + p.shape[1:]:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {(len(rows),) + p.shape[1:]}")
        if len(rows) == 0:
            continue
        if state.weight_decay:
            g = g + state.weight_decay * p[rows].astype(np.float64)
        m = state.m[name]
        v = state.v[name]
        m_rows = state.beta1 * m[rows] + (1.0 - state.beta1) * g
        v_rows = state.beta2 * v[rows] + (1.0 - state.beta2) * g * g
        m[rows] = m_rows
        v[rows] = v_rows
        step = state.lr * (m_rows / bc1) / (np.sqrt(v_rows / bc2) + state.eps)
        p[rows] = (p[rows].astype(np.float64) - step).astype(p.dtype)


def accumulate_rows(index: np.ndarray, values: np.ndarray, *more) -> tuple[np.ndarray, np.ndarray]:
    """Sum gradient rows that share an index; returns ``(unique_rows, summed)``.

    Extra ``(index, values)`` pairs may be passed to merge several sources
    (e.g. positive and negative item gradients) into one table.
    """
    idx = [np.asarray(index)]
    vals = [np.asarray(values)]
    for k in range(0, len(more), 2):
        idx.append(np.asarray(more[k]))
        vals.append(np.asarray(more[k + 1]))
    idx = np.concatenate(idx)
    vals = np.concatenate(vals)
    rows, inverse = np.unique(idx, return_inverse=True)
    out = np.zeros((rows.size,) + vals.shape[1:], dtype=np.float64)
    np.add.at(out, inverse, vals)
    return rows, out
