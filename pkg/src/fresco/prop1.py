"""Monte Carlo check that unified re-noise beats independent re-noise.

Each trial draws ``x0, eps ~ N(0, I_d)``, places the state on the linear path
at ``t_s``, applies one re-noise update to ``t_e`` and measures the squared
distance to the same path at ``t_e``. The independent update must stay above
``b^2 d``, ``b`` being its noise coefficient.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .transition import INDEPENDENT, UNIFIED, renoise_coefficients

# Domain tag mixed into trial-stream seeds, keeps them apart from the noise field.
TRIAL_DOMAIN = 0x50524F5031
SWEEP_DIMS = (64, 256, 1024)


@dataclass(frozen=True)
class Prop1Config:
    d: int = 1024
    t_s: float = 0.4
    t_e: float = 0.5
    trials: int = 100_000
    master_seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError("d must be a positive integer")
        if self.trials < 2:
            raise ConfigurationError("trials must be >= 2")
        if not (0.0 <= self.t_s <= self.t_e <= 1.0):
            raise ConfigurationError(f"need 0 <= t_s <= t_e <= 1, got t_s={self.t_s}, t_e={self.t_e}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must fit in 64 bits")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float

    @property
    def ci(self):
        """3-sigma interval."""
        return (self.mean - 3 * self.stderr, self.mean + 3 * self.stderr)


def _estimate(samples):
    n = samples.size
    return Estimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n)))


def closed_form_independent(t_s, t_e):
    """Per-dimension expected squared error of the independent update."""
    beta, alpha = renoise_coefficients(t_s, t_e, INDEPENDENT)
    return alpha**2 + (t_e - beta * t_s) ** 2


def trial_seeds(master_seed, trials, d):
    idx = np.arange(trials, dtype=np.uint64)
    return _kernels.digest_np(master_seed, idx, np.uint64(d), np.uint64(TRIAL_DOMAIN))


def _errors(cfg, use_numba=None):
    beta, alpha_u = renoise_coefficients(cfg.t_s, cfg.t_e, UNIFIED)
    _, alpha_i = renoise_coefficients(cfg.t_s, cfg.t_e, INDEPENDENT)
    seeds = trial_seeds(cfg.master_seed, cfg.trials, cfg.d)
    return _kernels.transition_errors(seeds, cfg.d, cfg.t_s, cfg.t_e, beta, alpha_u, alpha_i, use_numba)


def simulate_transition(cfg, strategy, use_numba=None):
    """Mean squared deviation from the target path state for one strategy."""
    if strategy not in (UNIFIED, INDEPENDENT):
        raise ValueError(f"unknown strategy {strategy!r}")
    err_u, err_i = _errors(cfg, use_numba)
    return _estimate(err_u if strategy == UNIFIED else err_i)


@dataclass(frozen=True)
class SweepResult:
    dims: tuple
    estimates: tuple
    slope: float
    slope_stderr: float
    intercept: float
    intercept_stderr: float
    expected_slope: float

    @property
    def slope_rel_error(self):
        if self.expected_slope == 0:
            return abs(self.slope)
        return abs(self.slope - self.expected_slope) / self.expected_slope

    @property
    def slope_ok(self):
        return self.slope_rel_error <= 0.05

    @property
    def intercept_ok(self):
        return abs(self.intercept) <= max(3 * self.intercept_stderr, 1e-12)


def dimension_sweep(cfg, dims=SWEEP_DIMS, use_numba=None):
    """Weighted least-squares line of independent MSE against ``d``."""
    ests = []
    for d in dims:
        sub = Prop1Config(d, cfg.t_s, cfg.t_e, cfg.trials, cfg.master_seed)
        ests.append(_estimate(_errors(sub, use_numba)[1]))
    x = np.asarray(dims, dtype=np.float64)
    y = np.array([e.mean for e in ests])
    se = np.array([e.stderr for e in ests])
    w = 1.0 / np.maximum(se, 1e-300) ** 2 if (se > 0).all() else np.ones_like(se)
    design = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(design.T @ (w[:, None] * design))
    intercept, slope = cov @ design.T @ (w * y)
    return SweepResult(
        tuple(dims), tuple(ests), float(slope), float(math.sqrt(cov[1, 1])),
        float(intercept), float(math.sqrt(cov[0, 0])), closed_form_independent(cfg.t_s, cfg.t_e),
    )


@dataclass(frozen=True)
class Prop1Report:
    config: Prop1Config
    unified: Estimate
    independent: Estimate
    bound: float
    expected_independent: float
    sweep: SweepResult | None = None

    @property
    def ordering_holds(self):
        sigma = math.hypot(self.unified.stderr, self.independent.stderr)
        return self.unified.mean <= self.independent.mean + 3 * sigma

    @property
    def bound_holds(self):
        return self.independent.mean >= self.bound - 3 * self.independent.stderr

    @property
    def closed_form_holds(self):
        return abs(self.independent.mean - self.expected_independent) <= 3 * self.independent.stderr

    @property
    def passed(self):
        ok = self.ordering_holds and self.bound_holds
        if self.sweep is not None:
            ok = ok and self.sweep.slope_ok and self.sweep.intercept_ok
        return ok

    def row(self):
        c = self.config
        out = {
            "d": c.d, "t_s": c.t_s, "t_e": c.t_e, "trials": c.trials, "seed": c.master_seed,
            "mse_unified": self.unified.mean, "se_unified": self.unified.stderr,
            "mse_independent": self.independent.mean, "se_independent": self.independent.stderr,
            "expected_independent": self.expected_independent, "bound_b2d": self.bound,
            "ordering_holds": self.ordering_holds, "bound_holds": self.bound_holds,
        }
        if self.sweep is not None:
            out.update(
                slope=self.sweep.slope, expected_slope=self.sweep.expected_slope,
                intercept=self.sweep.intercept, slope_ok=self.sweep.slope_ok,
                intercept_ok=self.sweep.intercept_ok,
            )
        out["passed"] = self.passed
        return out


def check_prop1(cfg, sweep=True, use_numba=None):
    """Run both strategies on common random numbers and evaluate the inequalities."""
    err_u, err_i = _errors(cfg, use_numba)
    _, b = renoise_coefficients(cfg.t_s, cfg.t_e, INDEPENDENT)
    return Prop1Report(
        cfg,
        _estimate(err_u),
        _estimate(err_i),
        b * b * cfg.d,
        closed_form_independent(cfg.t_s, cfg.t_e) * cfg.d,
        dimension_sweep(cfg, use_numba=use_numba) if sweep else None,
    )
