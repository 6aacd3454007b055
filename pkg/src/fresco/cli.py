"""``fresco`` command line: run, validate-prop1, cost, noise-stats."""

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from scipy import stats

from . import _kernels, svg
from ._accel import backend_name
from .config import ConfigFileNotFound, ConfigSyntaxError, ConfigValueError, ExperimentConfig, parse_config
from .cost_model import ModelCost, report_csv, schedule_cost
from .errors import FrescoError
from .mixed_grid import write_canvas
from .noise_field import NoiseField
from .prop1 import Prop1Config, check_prop1
from .toy_diffusion import BASELINE, RUN_MODES, RunTrace, make_grf_prior, mse, resolve_mode, run

log = logging.getLogger("fresco")

EXIT_OK = 0
EXIT_FAILED = 1
NOISE_STATS_WIDTH = 1000


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _header(digest, seed):
    return f"fresco config_sha256={digest} master_seed={seed}"


def _args_digest(**kwargs):
    return hashlib.sha256(json.dumps(kwargs, sort_keys=True).encode()).hexdigest()


def _csv_text(rows, header_comment):
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(rows[0]))
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


def _emit(text, out_dir, name):
    sys.stdout.write(text)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, newline="\n")


def _load_config(path):
    return parse_config(path) if path else ExperimentConfig()


# -- run ----------------------------------------------------------------------

def execute_runs(cfg, modes, jobs=1):
    """Baseline plus ``modes`` on one noise field; returns ``{mode: RunResult}``."""
    field = NoiseField(cfg.master_seed, *cfg.dims)
    prior = make_grf_prior(cfg.dims, cfg.correlation_length, cfg.prior_seed, cfg.mean_scale)
    renoise_seed = _kernels.digest_int(cfg.master_seed, cfg.renoise_seed, 0, 1)
    baseline = run(BASELINE, cfg.schedule_for(BASELINE), prior, field, keep_states=True)
    others = [m for m in modes if m != BASELINE]

    def one(mode):
        return run(mode, cfg.schedule_for(mode), prior, field, gate=cfg.gate, gamma=cfg.gamma,
                   renoise_seed=renoise_seed, baseline=baseline)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(one, others))
    out = {BASELINE: baseline}
    out.update(zip(others, results))
    return out


def cmd_run(args):
    cfg = _load_config(args.config).with_overrides(master_seed=args.seed)
    modes = [resolve_mode(m) for m in (args.mode or cfg.modes)]
    ordered = [BASELINE] + [m for m in RUN_MODES if m in modes and m != BASELINE]
    header = _header(cfg.digest(), cfg.master_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    results = execute_runs(cfg, ordered, args.jobs)
    base = results[BASELINE]
    base_cost = None
    rows = []
    for mode in ordered:
        res = results[mode]
        (out / f"trace_{mode}.csv").write_text(res.trace.to_csv(header), newline="\n")
        if args.dump:
            write_canvas(out / f"canvas_{mode}.frsc", res.canvas)
        report = schedule_cost(cfg.cost, cfg.schedule_for(mode), cfg.schedule_for(BASELINE), cfg.dims,
                               trace=res.trace, baseline_trace=base.trace)
        base_cost = report.baseline_flops
        err = mse(res.canvas, base.canvas)
        rows.append({
            "mode": mode,
            "nfe": res.nfe,
            "model_flops": report.total_flops,
            "speedup": report.speedup,
            "mse_to_baseline": err,
            "rel_mse_to_baseline": err / float(base.canvas.var()),
        })
    summary = _csv_text(rows, header + f" baseline_flops={base_cost!r}")
    (out / "summary.csv").write_text(summary, newline="\n")
    sys.stdout.write(summary)
    if args.svg:
        tokens = {m: ([r.step for r in results[m].trace.rows], results[m].trace.active_tokens) for m in ordered}
        (out / "tokens.svg").write_text(
            svg.line_plot(tokens, "Active tokens per step", "step", "active tokens"), newline="\n")
        points = {r["mode"]: (r["nfe"], r["mse_to_baseline"]) for r in rows}
        (out / "mse_vs_nfe.svg").write_text(
            svg.scatter_plot(points, "Final MSE to baseline vs NFE", "NFE", "MSE"), newline="\n")
    return EXIT_OK


# -- validate-prop1 ------------------------------------------------------------------

def cmd_validate_prop1(args):
    cfg = Prop1Config(d=args.d, t_s=args.ts, t_e=args.te, trials=args.trials, master_seed=args.seed or 0)
    report = check_prop1(cfg, sweep=args.sweep)
    digest = _args_digest(d=cfg.d, t_s=cfg.t_s, t_e=cfg.t_e, trials=cfg.trials, sweep=args.sweep)
    _emit(_csv_text([report.row()], _header(digest, cfg.master_seed)), args.out, "prop1.csv")
    return EXIT_OK if report.passed else EXIT_FAILED


# -- cost ----------------------------------------------------------------------------

def cmd_cost(args):
    cfg = _load_config(args.schedule).with_overrides(master_seed=args.seed)
    if args.a is not None or args.c is not None:
        cfg = cfg.with_overrides(cost=ModelCost(cfg.cost.a if args.a is None else args.a,
                                                cfg.cost.c if args.c is None else args.c))
    mode = resolve_mode(args.mode)
    schedule = cfg.schedule_for(mode)
    trace = None
    if args.trace:
        trace = RunTrace.from_csv(Path(args.trace).read_text())
    elif schedule.gated:
        log.info("gated schedule without --trace: measuring token counts with a sampler run")
        trace = execute_runs(cfg, [mode])[mode].trace
    report = schedule_cost(cfg.cost, schedule, cfg.schedule_for(BASELINE), cfg.dims, trace=trace)
    header = _header(cfg.digest(), cfg.master_seed)
    text = report_csv(report, {"mode": mode, "a": cfg.cost.a, "c": cfg.cost.c}, header)
    _emit(text, args.out, "cost.csv")
    return EXIT_OK


# -- noise-stats ---------------------------------------------------------------------

def noise_statistics(n, seed):
    width = min(n, NOISE_STATS_WIDTH)
    height = math.ceil(n / width)
    field = NoiseField(seed, height, width, 1)
    values = field.fine_values().ravel()[:n]
    ks = stats.kstest(values, "norm")
    mean = float(values.mean())
    var = float(values.var())
    row = {
        "n": n,
        "mean": mean,
        "variance": var,
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "backend": backend_name(),
    }
    row["passed"] = bool(abs(mean) < 0.005 and abs(var - 1.0) < 0.01 and ks.pvalue > 0.01)
    return row


def cmd_noise_stats(args):
    seed = args.seed or 0
    row = noise_statistics(args.n, seed)
    _emit(_csv_text([row], _header(_args_digest(n=args.n), seed)), args.out, "noise_stats.csv")
    return EXIT_OK if row["passed"] else EXIT_FAILED


# -- entry point ----------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default=None, help="output directory")

    parser = argparse.ArgumentParser(prog="fresco", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="paired sampler runs with traces and summary")
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--mode", action="append", choices=["baseline", "bottleneck", "fresco", *RUN_MODES])
    p.add_argument("--dump", action="store_true", help="write FRSC canvas dumps")
    p.add_argument("--svg", action="store_true", help="write SVG plots")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    p.set_defaults(func=cmd_run, out="out")

    p = sub.add_parser("validate-prop1", parents=[common], help="Monte Carlo re-noise comparison")
    p.add_argument("--d", type=int, default=1024)
    p.add_argument("--ts", type=float, default=0.4)
    p.add_argument("--te", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--sweep", action="store_true", help="also fit MSE against d over 64, 256, 1024")
    p.set_defaults(func=cmd_validate_prop1)

    p = sub.add_parser("cost", parents=[common], help="FLOPs and speedup for a schedule")
    p.add_argument("--schedule", required=True, help="TOML experiment config holding the schedules")
    p.add_argument("--trace", help="RunTrace CSV with measured token counts")
    p.add_argument("--mode", default="fresco")
    p.add_argument("--a", type=float, default=None, help="linear FLOPs per token")
    p.add_argument("--c", type=float, default=None, help="attention FLOPs per token pair")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("noise-stats", parents=[common], help="moment and KS statistics of the noise field")
    p.add_argument("--n", type=int, default=1_000_000)
    p.set_defaults(func=cmd_noise_stats)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "run" and args.out is None:
        args.out = "out"
    try:
        return args.func(args)
    except (ConfigFileNotFound, ConfigSyntaxError, ConfigValueError) as exc:
        print(f"fresco: {exc}", file=sys.stderr)
        return exc.exit_code
    except FrescoError as exc:
        print(f"fresco: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
