"""Stage schedules shared by the sampler and the cost model.

A stage runs ``steps`` Euler steps on a uniform time grid from ``t_start``
down to ``t_end``. Consecutive stages must not skip time: the next stage may
start exactly where the previous one ended, or later (a re-entry at higher
noise, which the boundary's re-noise update realizes). Starting earlier than
the previous end is a gap and is rejected.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ScheduleError
from .transition import INDEPENDENT, UNIFIED

RENOISE_KINDS = (UNIFIED, INDEPENDENT)


@dataclass(frozen=True)
class Stage:
    level: int
    steps: int
    t_start: float
    t_end: float
    gated: bool = False
    renoise: str = UNIFIED

    def __post_init__(self):
        if int(self.level) != self.level or self.level < 0:
            raise ScheduleError(f"stage level must be a non-negative integer, got {self.level}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ScheduleError(f"stage steps must be an integer >= 1, got {self.steps}")
        if not (0.0 <= self.t_end < self.t_start <= 1.0):
            raise ScheduleError(f"stage times must satisfy 0 <= t_end < t_start <= 1, got {self.t_start} -> {self.t_end}")
        if self.renoise not in RENOISE_KINDS:
            raise ScheduleError(f"renoise must be one of {RENOISE_KINDS}, got {self.renoise!r}")

    def times(self):
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    def to_dict(self):
        return {
            "level": self.level,
            "steps": self.steps,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "gated": self.gated,
            "renoise": self.renoise,
        }


@dataclass(frozen=True)
class StageSchedule:
    stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ScheduleError("schedule needs at least one stage")
        if stages[0].t_start != 1.0:
            raise ScheduleError(f"first stage must start at t=1, got {stages[0].t_start}")
        if stages[-1].t_end != 0.0:
            raise ScheduleError(f"last stage must end at t=0, got {stages[-1].t_end}")
        for i, (prev, nxt) in enumerate(zip(stages, stages[1:]), start=1):
            if nxt.t_start < prev.t_end:
                raise ScheduleError(
                    f"stage {i} starts at t={nxt.t_start} below previous end t={prev.t_end}: contiguity gap"
                )
            if nxt.level > prev.level:
                raise ScheduleError(f"stage {i} level {nxt.level} is coarser than stage {i - 1} level {prev.level}")

    @property
    def nfe(self):
        return sum(s.steps for s in self.stages)

    @property
    def max_level(self):
        return self.stages[0].level

    @property
    def gated(self):
        return any(s.gated for s in self.stages)

    def step_times(self):
        """``(stage_index, t, t_next)`` for every step in order."""
        out = []
        for i, stage in enumerate(self.stages):
            ts = stage.times()
            out.extend((i, float(ts[k]), float(ts[k + 1])) for k in range(stage.steps))
        return out

    def to_list(self):
        return [s.to_dict() for s in self.stages]

    @classmethod
    def from_list(cls, items):
        return cls(tuple(Stage(**item) for item in items))


def baseline_schedule(steps=50):
    return StageSchedule((Stage(level=0, steps=steps, t_start=1.0, t_end=0.0),))


# 8 coarse / 6 mixed / 4 fine, the assumed split of an 18-NFE run.
DEFAULT_SPLIT = (8, 6, 4)
DEFAULT_TIMES = ((1.0, 0.55), (0.6, 0.3), (0.35, 0.0))


def fresco_schedule(max_level=2, split=DEFAULT_SPLIT, times=DEFAULT_TIMES):
    (a, b, c), ((t0, t1), (t2, t3), (t4, t5)) = split, times
    return StageSchedule(
        (
            Stage(max_level, a, t0, t1, gated=False),
            Stage(max_level, b, t2, t3, gated=True, renoise=UNIFIED),
            Stage(0, c, t4, t5, gated=False, renoise=UNIFIED),
        )
    )


def bottleneck_schedule(max_level=2, split=DEFAULT_SPLIT, times=DEFAULT_TIMES):
    (a, b, c), ((t0, t1), (t2, t3), (t4, t5)) = split, times
    mid = max(max_level - 1, 0)
    return StageSchedule(
        (
            Stage(max_level, a, t0, t1),
            Stage(mid, b, t2, t3, renoise=INDEPENDENT),
            Stage(0, c, t4, t5, renoise=INDEPENDENT),
        )
    )
