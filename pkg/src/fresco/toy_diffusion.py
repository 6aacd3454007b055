"""Analytically tractable diffusion used to measure sampling strategies.

The data distribution is a Gaussian random field with a separable
squared-exponential covariance, so the posterior mean ``E[x0 | x_t]`` under
``x_t = (1 - t) x0 + t eps`` has a closed form and the rectified-flow sampler
can be checked against exact limits. Coarse levels see the prior pushed
through the same variance-preserving block average the noise field uses.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ScheduleError
from .hadamard import promote, promote_all
from .mixed_grid import MixedGrid
from .transition import INDEPENDENT, UNIFIED, TransitionSpec, independent_renoise, unified_renoise
from .variance_gate import GateConfig, select_promotions

BASELINE = "baseline_full_res"
BOTTLENECK = "bottleneck_independent"
FRESCO = "fresco"
RUN_MODES = (BASELINE, BOTTLENECK, FRESCO)

MODE_ALIASES = {"baseline": BASELINE, "bottleneck": BOTTLENECK, "fresco": FRESCO}


def resolve_mode(name):
    mode = MODE_ALIASES.get(name, name)
    if mode not in RUN_MODES:
        raise ConfigurationError(f"unknown run mode {name!r}")
    return mode


# -- resampling -----------------------------------------------------------------

def downsample(x, factor):
    """Block mean over ``factor x factor`` cells times ``factor``."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[:2]
    if factor < 1 or h % factor or w % factor:
        raise ConfigurationError(f"canvas {h}x{w} is not divisible by {factor}")
    if factor == 1:
        return x.copy()
    blocks = x.reshape(h // factor, factor, w // factor, factor, *x.shape[2:])
    return blocks.mean(axis=(1, 3)) * factor


def upsample_naive(x, factor):
    """Nearest-neighbour replication divided by ``factor``; right inverse of :func:`downsample`."""
    x = np.asarray(x, dtype=np.float64)
    return np.repeat(np.repeat(x, factor, axis=0), factor, axis=1) / factor


# -- prior ------------------------------------------------------------------------

def _se_kernel(n, length):
    if length <= 0:
        return np.eye(n)
    idx = np.arange(n, dtype=np.float64)
    diff = idx[:, None] - idx[None, :]
    return np.exp(-0.5 * (diff / length) ** 2)


def _block_operator(n, factor):
    # 1-d factor of the 2-d variance-preserving block average.
    op = np.zeros((n // factor, n))
    for i in range(n // factor):
        op[i, i * factor:(i + 1) * factor] = 1.0 / math.sqrt(factor)
    return op


def _eig(k):
    w, u = np.linalg.eigh(k)
    if w.min() < -1e-8:
        raise ConfigurationError(f"covariance not positive semidefinite (min eigenvalue {w.min():.3e})")
    return np.clip(w, 0.0, None), u


@dataclass(eq=False)
class GrfPrior:
    mean: np.ndarray
    ky: np.ndarray
    kx: np.ndarray
    correlation_length: float = 0.0
    level: int = 0
    _levels: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.eval_y, self.evec_y = _eig(self.ky)
        self.eval_x, self.evec_x = _eig(self.kx)
        self.white = bool(np.array_equal(self.ky, np.eye(len(self.ky))) and np.array_equal(self.kx, np.eye(len(self.kx))))
        self._levels[self.level] = self

    @property
    def shape(self):
        return self.mean.shape

    @property
    def eigenvalues(self):
        return np.outer(self.eval_y, self.eval_x)

    def covariance(self):
        """Dense covariance of one channel over the flattened ``(H, W)`` grid."""
        return np.kron(self.ky, self.kx)

    def at_level(self, level):
        """Prior of the level-``level`` block values (relative to this prior's grid)."""
        if level in self._levels:
            return self._levels[level]
        s = 1 << (level - self.level)
        ay = _block_operator(self.ky.shape[0], s)
        ax = _block_operator(self.kx.shape[0], s)
        sub = GrfPrior(
            downsample(self.mean, s),
            ay @ self.ky @ ay.T,
            ax @ self.kx @ ax.T,
            self.correlation_length,
            level,
            self._levels,
        )
        return sub

    def sample(self, rng):
        z = rng.standard_normal(self.shape)
        scale = np.sqrt(self.eigenvalues)[..., None]
        return self.mean + self._from_eig(z * scale)

    def _to_eig(self, x):
        return np.einsum("ia,ijd,jb->abd", self.evec_y, x, self.evec_x)

    def _from_eig(self, y):
        return np.einsum("ia,abd,jb->ijd", self.evec_y, y, self.evec_x)

    def detail_variance(self):
        """Average variance of a unit-normalized Hadamard detail coefficient of 2x2 blocks."""
        def pair(k, a):
            n = k.shape[0] // 2
            vals = [a @ k[2 * i:2 * i + 2, 2 * i:2 * i + 2] @ a for i in range(n)]
            return float(np.mean(vals))

        plus, minus = np.array([1.0, 1.0]), np.array([1.0, -1.0])
        patterns = [(plus, minus), (minus, plus), (minus, minus)]
        return float(np.mean([pair(self.ky, ay) * pair(self.kx, ax) / 4.0 for ay, ax in patterns]))

    @cached_property
    def _detail_variance(self):
        return self.detail_variance()


def make_grf_prior(dims, correlation_length=0.0, prior_seed=0, mean_scale=0.0):
    """Separable squared-exponential GRF prior with unit marginal variance.

    ``correlation_length <= 0`` gives the white prior ``N(0, I)``. With
    ``mean_scale > 0`` the mean field is ``mean_scale`` times a draw from the
    zero-mean prior, seeded by ``prior_seed``.
    """
    h, w, d = dims
    if min(h, w, d) <= 0:
        raise ConfigurationError(f"prior dims must be positive, got {dims}")
    if correlation_length < 0:
        raise ConfigurationError("correlation_length must be >= 0")
    prior = GrfPrior(np.zeros((h, w, d)), _se_kernel(h, correlation_length), _se_kernel(w, correlation_length),
                     float(correlation_length))
    if mean_scale:
        draw = prior.sample(np.random.default_rng(prior_seed))
        prior = GrfPrior(mean_scale * draw, prior.ky, prior.kx, float(correlation_length))
    return prior


# -- denoiser and integrator -------------------------------------------------------

def analytic_denoiser(x_t, t, prior):
    """Exact posterior mean ``E[x0 | x_t]`` for ``x_t = (1-t) x0 + t eps``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if t == 0:
        return x_t.copy()
    if not 0 < t <= 1:
        raise ScheduleError(f"denoiser time must lie in [0, 1], got {t}")
    s = 1.0 - t
    y = x_t - s * prior.mean
    if prior.white:
        return s * y / (s * s + t * t) + prior.mean
    lam = prior.eigenvalues[..., None]
    gain = s * lam / (s * s * lam + t * t)
    return prior._from_eig(gain * prior._to_eig(y)) + prior.mean


def exact_flow_limit(x1, prior):
    """Endpoint at t=0 of the probability-flow ODE started from ``x1`` at t=1."""
    x1 = np.asarray(x1, dtype=np.float64)
    if prior.white:
        return prior.mean + x1
    scale = np.sqrt(prior.eigenvalues)[..., None]
    return prior.mean + prior._from_eig(scale * prior._to_eig(x1))


def euler_step(x_t, t, dt, denoiser):
    """One rectified-flow Euler step from ``t`` to ``t - dt``.

    ``denoiser(x, t)`` returns the x0 prediction.
    """
    if not 0 < dt <= t:
        raise ScheduleError(f"Euler step needs 0 < dt <= t, got dt={dt}, t={t}")
    x0_hat = denoiser(x_t, t)
    return x_t + dt * (x0_hat - x_t) / t


def sample_baseline(x1, prior, steps):
    """Plain full-resolution Euler sampler on a uniform grid; returns x at t=0."""
    ts = np.linspace(1.0, 0.0, steps + 1)
    x = np.asarray(x1, dtype=np.float64)
    den = lambda z, t: analytic_denoiser(z, t, prior)
    for a, b in zip(ts[:-1], ts[1:]):
        x = euler_step(x, a, a - b, den)
    return x


def denoise_grid(grid, t, prior):
    """Per-level x0 predictions for every active token of a mixed grid.

    Level l sees the level-l view of the assembled canvas, with its own
    tokens' exact values, denoised against the level-l prior.
    """
    preds = {}
    levels = grid.levels_present()
    if prior.white and not prior.mean.any():
        s = 1.0 - t
        gain = s / (s * s + t * t) if t > 0 else 1.0
        for level in levels:
            preds[level] = gain * grid.values[level]
        return preds
    canvas = grid.assemble_canvas()
    for level in levels:
        view = downsample(canvas, 1 << level)
        active = grid.active[level]
        view[active] = grid.values[level][active]
        preds[level] = analytic_denoiser(view, t, prior.at_level(level))
    return preds


# -- run trace ---------------------------------------------------------------------

TRACE_COLUMNS = ("step", "t", "nfe_cum", "active_tokens", "promotions", "mse_to_baseline")


@dataclass
class TraceRow:
    step: int
    t: float
    nfe_cum: int
    active_tokens: int
    promotions: int
    mse_to_baseline: float | None = None


@dataclass
class RunTrace:
    rows: list = field(default_factory=list)

    @property
    def nfe(self):
        return self.rows[-1].nfe_cum if self.rows else 0

    @property
    def active_tokens(self):
        return [r.active_tokens for r in self.rows]

    def to_csv(self, header_comment=None):
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.rows:
            mse = "" if r.mse_to_baseline is None else repr(float(r.mse_to_baseline))
            writer.writerow([r.step, repr(float(r.t)), r.nfe_cum, r.active_tokens, r.promotions, mse])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.DictReader(lines)
        missing = set(TRACE_COLUMNS[:-1]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"trace CSV lacks columns {sorted(missing)}")
        rows = []
        for rec in reader:
            mse = rec.get("mse_to_baseline") or None
            rows.append(
                TraceRow(
                    int(rec["step"]), float(rec["t"]), int(rec["nfe_cum"]),
                    int(rec["active_tokens"]), int(rec["promotions"]),
                    None if mse is None else float(mse),
                )
            )
        return cls(rows)


@dataclass
class RunResult:
    mode: str
    canvas: np.ndarray
    trace: RunTrace
    states: list = field(default_factory=list)

    @property
    def nfe(self):
        return self.trace.nfe

    def state_at(self, t):
        """Canvas at time ``t``, linearly interpolated between recorded steps."""
        if not self.states:
            raise ValueError("run was executed without keep_states")
        ts = np.array([s[0] for s in self.states])
        if t >= ts[0]:
            return self.states[0][1]
        if t <= ts[-1]:
            return self.states[-1][1]
        k = int(np.searchsorted(-ts, -t, side="right")) - 1
        t_hi, t_lo = ts[k], ts[k + 1]
        w = (t_hi - t) / (t_hi - t_lo)
        return (1.0 - w) * self.states[k][1] + w * self.states[k + 1][1]


def mse(a, b):
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


def detail_scale(t, gamma, detail_var):
    """Std of each injected detail column for a promotion at time ``t``.

    Matches the marginal spread of child-level detail coefficients of
    ``(1-t) x0 + t eps`` when ``gamma = 1``.
    """
    return gamma * math.sqrt((1.0 - t) ** 2 * detail_var + t * t) / 2.0


def _validate(mode, schedule, prior, field_):
    if tuple(prior.shape) != tuple(field_.shape):
        raise ConfigurationError(f"prior dims {prior.shape} differ from field dims {field_.shape}")
    stages = schedule.stages
    if stages[-1].level != 0:
        raise ConfigurationError("last stage must run at level 0 so the output is full resolution")
    size = 1 << schedule.max_level
    if field_.height % size or field_.width % size:
        raise ConfigurationError(f"canvas {field_.height}x{field_.width} not divisible by 2^{schedule.max_level}")
    if mode == BASELINE:
        if len(stages) != 1:
            raise ConfigurationError("baseline mode takes a single full-resolution stage")
    elif mode == BOTTLENECK:
        if schedule.gated:
            raise ConfigurationError("bottleneck mode upsamples whole grids; gated stages are not allowed")
        if any(s.renoise != INDEPENDENT for s in stages[1:]):
            raise ConfigurationError("bottleneck mode requires independent re-noise at every boundary")
    elif mode == FRESCO:
        if any(s.renoise != UNIFIED for s in stages[1:]):
            raise ConfigurationError("fresco mode requires unified re-noise at every boundary")
    else:
        raise ConfigurationError(f"unknown run mode {mode!r}")


def run(mode, schedule, prior, field, gate=None, gamma=1.0, renoise_seed=0, baseline=None, keep_states=False):
    """Sample one canvas with the given strategy.

    ``baseline`` is an optional :class:`RunResult` recorded with
    ``keep_states=True``; when given, each trace row carries the MSE between
    this run's assembled canvas and the baseline path at the same time.
    """
    mode = resolve_mode(mode)
    _validate(mode, schedule, prior, field)
    gate = gate or GateConfig()
    stages = schedule.stages
    grid = MixedGrid.init_grid(stages[0].level, field, window=gate.window, max_level=schedule.max_level)
    detail_var = {lv: prior.at_level(lv)._detail_variance for lv in range(schedule.max_level)}
    sigma = lambda parent_level: detail_scale(grid.t, gamma, detail_var[parent_level - 1])

    trace = RunTrace()
    states = [(1.0, grid.assemble_canvas())] if keep_states else []
    nfe = 0
    step = 0
    for si, stage in enumerate(stages):
        if si > 0:
            prev = stages[si - 1]
            spec = TransitionSpec(prev.t_end, stage.t_start, stage.renoise)
            if mode == FRESCO:
                unified_renoise(grid, spec, field)
                promote_all(grid, stage.level, field, sigma)
            else:
                cur = stages[si - 1].level
                if stage.level < cur:
                    up = upsample_naive(grid.values[cur], 1 << (cur - stage.level))
                    grid = MixedGrid.from_level_values(stage.level, up, schedule.max_level, gate.window, grid.t)
                seed = _kernels.digest_int(renoise_seed, si, 0, 0)
                independent_renoise(grid, spec, seed)
        ts = stage.times()
        for k in range(stage.steps):
            t, t_next = float(ts[k]), float(ts[k + 1])
            n_active = grid.active_count
            preds = denoise_grid(grid, t, prior)
            nfe += 1
            dt = t - t_next
            for level, x0_hat in preds.items():
                a = grid.active[level]
                v = grid.values[level]
                v[a] = v[a] + dt * (x0_hat[a] - v[a]) / t
            grid.t = t_next
            grid.check_finite()
            grid.record_step()
            promoted = 0
            if stage.gated and mode == FRESCO:
                chosen = select_promotions(grid, gate)
                promote(grid, chosen, field, sigma)
                promoted = len(chosen)
            step += 1
            row = TraceRow(step, t_next, nfe, n_active, promoted)
            if baseline is not None or keep_states:
                canvas = grid.assemble_canvas()
                if baseline is not None:
                    row.mse_to_baseline = mse(canvas, baseline.state_at(t_next))
                if keep_states:
                    states.append((t_next, canvas))
            trace.rows.append(row)
    grid.check_partition()
    if grid.active_count != field.height * field.width:
        raise ConfigurationError("run ended with coarse tokens left")
    return RunResult(mode, grid.assemble_canvas(), trace, states)
