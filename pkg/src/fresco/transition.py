"""Re-noise updates at stage boundaries, ``z <- beta * z + alpha * eps``.

Coefficients come from the rectified-flow marginal ``x_t = (1-t) x0 + t eps``:
``beta = (1 - t_e) / (1 - t_s)`` rescales the signal. The unified form reuses
the field noise and sets ``alpha = t_e - beta * t_s``, which moves an on-path
state exactly to the same path at ``t_e``. The independent form draws fresh
noise and sets ``alpha = sqrt(t_e^2 - beta^2 t_s^2)`` so only the marginal
variance is restored.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScheduleError

UNIFIED = "unified"
INDEPENDENT = "independent"


def renoise_coefficients(t_s, t_e, kind):
    if not (0.0 <= t_s <= 1.0 and 0.0 <= t_e <= 1.0):
        raise ScheduleError(f"transition times must lie in [0, 1], got t_s={t_s}, t_e={t_e}")
    if t_e < t_s:
        raise ScheduleError(f"re-entry time t_e={t_e} precedes t_s={t_s}")
    if kind not in (UNIFIED, INDEPENDENT):
        raise ValueError(f"unknown re-noise kind {kind!r}")
    if t_e == t_s:
        return 1.0, 0.0
    beta = (1.0 - t_e) / (1.0 - t_s)
    if kind == UNIFIED:
        alpha = t_e - beta * t_s
    else:
        alpha = math.sqrt(max(0.0, t_e * t_e - beta * beta * t_s * t_s))
    return beta, alpha


@dataclass(frozen=True)
class TransitionSpec:
    t_s: float
    t_e: float
    kind: str = UNIFIED

    def __post_init__(self):
        renoise_coefficients(self.t_s, self.t_e, self.kind)

    @property
    def beta(self):
        return renoise_coefficients(self.t_s, self.t_e, self.kind)[0]

    @property
    def alpha(self):
        return renoise_coefficients(self.t_s, self.t_e, self.kind)[1]


def _apply(grid, beta, alpha, noise_for_level, t_e):
    for level in grid.levels_present():
        a = grid.active[level]
        eps = noise_for_level(level)
        v = grid.values[level]
        v[a] = beta * v[a] + alpha * eps[a]
    grid.t = t_e
    grid.clear_histories()


def unified_renoise(grid, spec, field):
    """In-place unified re-noise using each token's own block of the field."""
    if spec.kind != UNIFIED:
        raise ValueError("unified_renoise needs a unified TransitionSpec")
    _apply(grid, spec.beta, spec.alpha, field.block_values, spec.t_e)


def independent_renoise(grid, spec, rng_seed):
    """In-place re-noise with fresh iid noise from ``numpy.random.default_rng(rng_seed)``.

    Noise is drawn for every cell of every level in level order, so the draw
    does not depend on which tokens happen to be active.
    """
    if spec.kind != INDEPENDENT:
        raise ValueError("independent_renoise needs an independent TransitionSpec")
    rng = np.random.default_rng(rng_seed)
    draws = [rng.standard_normal(v.shape) for v in grid.values]
    _apply(grid, spec.beta, spec.alpha, lambda level: draws[level], spec.t_e)
