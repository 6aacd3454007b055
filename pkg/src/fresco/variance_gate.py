"""Temporal-variance gate that picks converged coarse tokens for promotion."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InsufficientHistory
from .mixed_grid import TokenCoord


@dataclass(frozen=True)
class GateConfig:
    tau: float = 1e-3
    rho_max: float = 0.25
    window: int = 4

    def __post_init__(self):
        if not (self.tau >= 0):
            raise ConfigurationError(f"gate.tau must be >= 0, got {self.tau}")
        if not (0 < self.rho_max <= 1):
            raise ConfigurationError(f"gate.rho_max must be in (0, 1], got {self.rho_max}")
        if int(self.window) != self.window or self.window < 2:
            raise ConfigurationError(f"gate.window must be an integer >= 2, got {self.window}")


def token_variance(history):
    """Population variance over time, per channel, averaged over channels."""
    h = np.asarray(history, dtype=np.float64)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] < 2:
        raise InsufficientHistory(f"need at least 2 history entries, got {h.shape[0]}")
    return float(h.var(axis=0).mean())


def level_variances(grid, level, window):
    """Vectorized :func:`token_variance` over the last ``window`` entries at one level."""
    hist = grid.history[level][grid.window - window:]
    return hist.var(axis=0).mean(axis=-1)


def select_promotions(grid, cfg):
    """Coarse tokens with a full window and ``v <= tau``, most stable first.

    Ties are broken by (level descending, row, col); the list is truncated to
    ``floor(rho_max * active_count)`` entries. Nothing is mutated.
    """
    if cfg.window > grid.window:
        raise ConfigurationError(f"gate window {cfg.window} exceeds grid history window {grid.window}")
    cap = math.floor(cfg.rho_max * grid.active_count)
    if cap == 0:
        return []
    vs, levels, rows, cols = [], [], [], []
    for level in range(1, grid.max_level + 1):
        eligible = grid.active[level] & (grid.hist_len[level] >= cfg.window)
        if not eligible.any():
            continue
        v = level_variances(grid, level, cfg.window)
        r, c = np.nonzero(eligible & (v <= cfg.tau))
        vs.append(v[r, c])
        levels.append(np.full(r.size, level))
        rows.append(r)
        cols.append(c)
    if not vs:
        return []
    v = np.concatenate(vs)
    lv = np.concatenate(levels)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    order = np.lexsort((c, r, -lv, v))[:cap]
    return [TokenCoord(int(lv[i]), int(r[i]), int(c[i])) for i in order]
