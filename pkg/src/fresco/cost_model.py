"""Denoiser FLOPs accounting: ``F(N) = a N + c N^2`` per step.

Only denoiser forward passes are counted; VAE, text encoder and scheduler
overheads are not modelled.
"""

import csv
import io
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class ModelCost:
    a: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.a < 0 or self.c < 0:
            raise ConfigurationError("cost constants a, c must be non-negative")

    @classmethod
    def dit_like(cls, hidden=3072, layers=57):
        """Placeholder transformer constants: 24 h^2 linear and 4 h attention FLOPs per layer."""
        return cls(a=24.0 * hidden * hidden * layers, c=4.0 * hidden * layers)


def step_flops(model, tokens):
    if tokens < 1:
        raise ValueError("token count must be >= 1")
    return model.a * tokens + model.c * tokens * tokens


@dataclass(frozen=True)
class CostReport:
    total_flops: float
    nfe: int
    baseline_flops: float
    baseline_nfe: int

    @property
    def speedup(self):
        return self.baseline_flops / self.total_flops

    def row(self):
        return {
            "total_flops": self.total_flops,
            "nfe": self.nfe,
            "baseline_flops": self.baseline_flops,
            "baseline_nfe": self.baseline_nfe,
            "speedup": self.speedup,
        }


def schedule_tokens(schedule, dims, trace=None):
    """Active tokens per step.

    Ungated stages run every token at the stage level. Gated schedules need a
    measured ``trace`` and use its per-step counts verbatim.
    """
    h, w = dims[0], dims[1]
    if trace is not None:
        counts = trace.active_tokens
        if len(counts) != schedule.nfe:
            raise ConfigurationError(f"trace has {len(counts)} steps, schedule has {schedule.nfe}")
        if max(counts) > h * w:
            raise ConfigurationError(f"trace token counts exceed the {h}x{w} canvas")
        return list(counts)
    if schedule.gated:
        raise ConfigurationError("gated schedule: token counts must come from a measured RunTrace")
    counts = []
    for stage in schedule.stages:
        size = 1 << stage.level
        if h % size or w % size:
            raise ConfigurationError(f"canvas {h}x{w} not divisible by 2^{stage.level}")
        counts.extend([(h // size) * (w // size)] * stage.steps)
    return counts


def schedule_cost(model, schedule, baseline, dims, baseline_dims=None, trace=None, baseline_trace=None):
    if baseline_dims is not None and tuple(baseline_dims[:2]) != tuple(dims[:2]):
        raise ConfigurationError(f"canvas dims differ: {tuple(dims[:2])} vs baseline {tuple(baseline_dims[:2])}")
    tokens = schedule_tokens(schedule, dims, trace)
    base_tokens = schedule_tokens(baseline, dims, baseline_trace)
    return CostReport(
        float(sum(step_flops(model, n) for n in tokens)),
        len(tokens),
        float(sum(step_flops(model, n) for n in base_tokens)),
        len(base_tokens),
    )


def report_csv(report, extra=None, header_comment=None):
    row = dict(extra or {})
    row.update(report.row())
    buf = io.StringIO()
    buf.write("# denoiser steps only; VAE and text encoder costs excluded\n")
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(row))
    writer.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()
