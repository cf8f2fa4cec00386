"""Command-line harness: configs, sweeps, reports.

Subcommands: ``simulate`` (one run), ``sweep`` (a cartesian experiment
plan), ``check-assumptions`` (kernel and initial-law reports),
``divergence`` (inequality suite and mollification-entropy tables) and
``rate`` (schedule/bound tables).

Config grammar
--------------
Configs are YAML mappings (parsed with ``yaml.safe_load``; comments with
``#``).  A single-run config carries the :class:`~cmvsim.simulate.SimConfig`
fields::

    model: decoupled-oracle     # preset id (required)
    n: 1000                     # particles (required)
    T: 1.0                      # horizon (required)
    dt: 0.01                    # default 0.01
    seed: 0
    kernel: gaussian            # gaussian | epanechnikov | uniform-ball
    strategy: naive             # naive | celllist
    h: 0.5                      # omit to derive from n via the schedule
    epsilon: 1.0e-3             # omit to derive from n via the schedule
    schedule: {C: 1.0, r: 0.5}  # constants used when h/epsilon omitted
    record_times: [1.0]         # defaults to [T]
    saturation: 10.0            # clamp level for saturated presets
    workers: 2                  # drift worker threads

An experiment plan adds ``base`` (a single-run mapping), ``axes`` (lists of
values per swept field), and optionally ``comparisons``, ``outputs`` and
``max_cells``; see the README for a worked example.  Unknown keys are
rejected with their full path.

Results CSV schema (long form): run_id, model, n, m, d, h, epsilon, dt, T,
seed, metric_name, metric_value, status, config_digest, content_hash.
"""

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import multiprocessing
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import divergences, models, simulate
from .errors import ConfigError, SimulationDivergedError
from .kernels import check_assumption_K, get_kernel, KERNEL_IDS
from .models import check_assumption_R, standard_normal_law
from .schedule import optimize_rate, rate_bound, rate_exponent, schedule as _schedule_point
from .simulate import SimConfig

__all__ = ["main", "load_config", "emit_config", "ExperimentPlan", "report_convergence"]

RESULT_COLUMNS = [
    "run_id", "model", "n", "m", "d", "h", "epsilon", "dt", "T", "seed",
    "metric_name", "metric_value", "status", "config_digest", "content_hash",
]

_SIM_FIELDS = {
    "model": str, "n": int, "T": float, "dt": float, "seed": int,
    "kernel": str, "strategy": str, "h": float, "epsilon": float,
    "record_times": list, "saturation": float, "workers": int,
}
_REQUIRED = ("model", "n", "T")
_AXIS_FIELDS = ("n", "h", "epsilon", "dt", "seed")


def default_workers(fallback=1):
    try:
        return max(1, int(os.environ.get("CMVSIM_WORKERS", str(fallback))))
    except ValueError:
        return fallback


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _sim_config_from_mapping(raw, where=""):
    if not isinstance(raw, dict):
        raise ConfigError(where or "<root>", "expected a mapping")
    prefix = where + "." if where else ""
    kwargs = {}
    for key, value in raw.items():
        if key == "schedule":
            if not isinstance(value, dict):
                raise ConfigError(prefix + "schedule", "expected a mapping")
            for k2, v2 in value.items():
                if k2 == "C":
                    kwargs["schedule_C"] = float(v2)
                elif k2 == "r":
                    kwargs["schedule_r"] = float(v2)
                else:
                    raise ConfigError(f"{prefix}schedule.{k2}", "unknown key")
            continue
        if key not in _SIM_FIELDS:
            raise ConfigError(prefix + key, "unknown key")
        want = _SIM_FIELDS[key]
        if key == "record_times":
            if not isinstance(value, (list, tuple)):
                raise ConfigError(prefix + key, "expected a list of times")
            kwargs[key] = tuple(float(v) for v in value)
            continue
        try:
            kwargs[key] = want(value)
        except (TypeError, ValueError):
            raise ConfigError(
                prefix + key, f"expected {want.__name__}, got {value!r}"
            ) from None
    for req in _REQUIRED:
        if req not in kwargs:
            raise ConfigError(prefix + req, "missing required key")
    cfg = SimConfig(**kwargs)
    try:
        cfg.resolve()
    except ValueError as exc:
        raise ConfigError(prefix.rstrip(".") or "<config>", str(exc)) from None
    return cfg


@dataclass
class Comparison:
    kind: str = "particle-vs-oracle"
    oracle_copies: int = 100_000
    oracle_seed: int = 987654321
    block: int = 0
    component: int = 0
    bins: int = 50
    lo: float = -16.0
    hi: float = 16.0

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.bins + 1)


@dataclass
class ExperimentPlan:
    """A base config, sweep axes, and the comparisons to evaluate per cell."""

    base: SimConfig
    axes: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)
    formats: tuple = ("csv",)
    max_cells: int = 10_000

    def cells(self):
        names = list(self.axes)
        total = 1
        for name in names:
            total *= len(self.axes[name])
        if total > self.max_cells:
            raise ConfigError("axes", f"{total} cells exceed the cap {self.max_cells}")
        out = []
        idx = [0] * len(names)
        for cell_index in range(total):
            overrides, rem = {}, cell_index
            for pos in range(len(names) - 1, -1, -1):
                k = len(self.axes[names[pos]])
                overrides[names[pos]] = self.axes[names[pos]][rem % k]
                rem //= k
            out.append((cell_index, replace(self.base, **overrides)))
        return out


def _plan_from_mapping(raw):
    if "base" not in raw:
        raise ConfigError("base", "missing required key")
    plan_keys = {"base", "axes", "comparisons", "outputs", "max_cells"}
    for key in raw:
        if key not in plan_keys:
            raise ConfigError(key, "unknown key")
    base = _sim_config_from_mapping(raw["base"], "base")
    axes = {}
    for name, values in (raw.get("axes") or {}).items():
        if name not in _AXIS_FIELDS:
            raise ConfigError(f"axes.{name}", f"not sweepable; choose from {_AXIS_FIELDS}")
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f"axes.{name}", "expected a nonempty list")
        caster = _SIM_FIELDS[name]
        axes[name] = [caster(v) for v in values]
    comparisons = []
    for pos, cmp_raw in enumerate(raw.get("comparisons") or []):
        allowed = {
            "kind", "oracle_copies", "oracle_seed", "block", "component",
            "bins", "range",
        }
        for key in cmp_raw:
            if key not in allowed:
                raise ConfigError(f"comparisons[{pos}].{key}", "unknown key")
        kind = cmp_raw.get("kind", "particle-vs-oracle")
        if kind != "particle-vs-oracle":
            raise ConfigError(f"comparisons[{pos}].kind", f"unknown kind {kind!r}")
        rng_pair = cmp_raw.get("range", (-16.0, 16.0))
        comparisons.append(
            Comparison(
                kind=kind,
                oracle_copies=int(cmp_raw.get("oracle_copies", 100_000)),
                oracle_seed=int(cmp_raw.get("oracle_seed", 987654321)),
                block=int(cmp_raw.get("block", 0)),
                component=int(cmp_raw.get("component", 0)),
                bins=int(cmp_raw.get("bins", 50)),
                lo=float(rng_pair[0]),
                hi=float(rng_pair[1]),
            )
        )
    outputs = raw.get("outputs") or {}
    formats = tuple(outputs.get("formats", ["csv"]))
    return ExperimentPlan(
        base=base,
        axes=axes,
        comparisons=comparisons,
        formats=formats,
        max_cells=int(raw.get("max_cells", 10_000)),
    )


def load_config(path):
    """Parse and validate a YAML config; returns SimConfig or ExperimentPlan."""
    if not os.path.exists(path):
        raise ConfigError(path, "file does not exist")
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(path, f"YAML parse failure: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level must be a mapping")
    if "base" in raw or "axes" in raw:
        return _plan_from_mapping(raw)
    return _sim_config_from_mapping(raw)


def _config_to_mapping(cfg):
    resolved = cfg.resolve()
    out = {
        "model": resolved.model,
        "n": resolved.n,
        "T": resolved.T,
        "dt": resolved.dt,
        "seed": resolved.seed,
        "kernel": resolved.kernel,
        "strategy": resolved.strategy,
        "h": resolved.h,
        "epsilon": resolved.epsilon,
        "schedule": {"C": resolved.schedule_C, "r": resolved.schedule_r},
        "record_times": list(resolved.record_times),
        "saturation": resolved.saturation,
    }
    if resolved.workers is not None:
        out["workers"] = resolved.workers
    return out


def emit_config(cfg):
    """Render a config back to canonical YAML (round-trips through load)."""
    return yaml.safe_dump(_config_to_mapping(cfg), sort_keys=True)


# ---------------------------------------------------------------------------
# metric plumbing
# ---------------------------------------------------------------------------

def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _float_repr(v):
    return repr(float(v))


def _metric_rows(cell_index, cfg, model, metrics, status, content_hash):
    resolved = cfg.resolve()
    digest = resolved.digest()
    run_id = hashlib.sha256(f"{cell_index}|{digest}".encode()).hexdigest()[:12]
    rows = []
    for name, value in metrics:
        rows.append({
            "run_id": run_id,
            "model": resolved.model,
            "n": resolved.n,
            "m": model.m,
            "d": model.d,
            "h": _float_repr(resolved.h),
            "epsilon": _float_repr(resolved.epsilon),
            "dt": _float_repr(resolved.dt),
            "T": _float_repr(resolved.T),
            "seed": resolved.seed,
            "metric_name": name,
            "metric_value": _float_repr(value) if value == value else "nan",
            "status": status,
            "config_digest": digest,
            "content_hash": content_hash,
        })
    return rows


def _run_cell(args):
    cell_index, cfg, comparisons, references = args
    resolved = cfg.resolve()
    model = models.preset(resolved.model, resolved.saturation)
    try:
        traj = simulate.run(resolved, model=model, collect_diagnostics=False)
    except SimulationDivergedError as exc:
        return _metric_rows(
            cell_index, cfg, model, [("diverged_at_step", float(exc.step))],
            "diverged", "",
        )
    blob = simulate.snapshot_bytes(traj.final, resolved.seed, resolved.digest())
    content_hash = hashlib.sha256(blob).hexdigest()
    metrics = []
    for pos, comparison in enumerate(comparisons):
        ref = references[pos]
        value = divergences.histogram_tv(
            traj.final, ref, (comparison.block, comparison.component),
            comparison.edges,
        )
        metrics.append(("histogram_tv_oracle", value))
    from .kernels import get_kernel
    from .nwdrift import DriftParams, floor_hit_rate

    params = DriftParams(
        h=resolved.h, epsilon=resolved.epsilon,
        kernel=get_kernel(resolved.kernel, model.d),
    )
    for j in range(model.m):
        metrics.append(
            (f"floor_hit_rate_b{j}", floor_hit_rate(traj.final, j, params))
        )
    metrics.append(
        ("terminal_mean_b0", float(np.mean(traj.final.positions[:, 0, :])))
    )
    return _metric_rows(cell_index, cfg, model, metrics, "ok", content_hash)


def run_sweep(plan, workers=1):
    """Execute every cell of a plan; returns result rows sorted by cell."""
    cells = plan.cells()
    references = []
    for comparison in plan.comparisons:
        model = models.preset(plan.base.model, plan.base.saturation)
        oracle_cfg = replace(
            plan.base, n=comparison.oracle_copies, seed=comparison.oracle_seed
        )
        references.append(
            simulate.run_oracle(model, comparison.oracle_copies, oracle_cfg).final
        )
    tasks = [(idx, cfg, plan.comparisons, references) for idx, cfg in cells]
    if workers > 1:
        # spawn, not fork: the JIT threading layer does not survive forking
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=workers, mp_context=ctx
        ) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["run_id"], r["metric_name"]))
    return rows


# ---------------------------------------------------------------------------
# convergence summary
# ---------------------------------------------------------------------------

def report_convergence(rows_or_path, metric="histogram_tv_oracle", r=0.5):
    """Per-n statistics of the particle-vs-oracle distance over seeds.

    Returns a dict with per-n mean/standard error, the fitted coefficient of
    a (log n)^(-r/(d r + 4)) decay, and a monotonicity verdict: means must
    be nonincreasing in n within one standard error of each difference.
    Requires at least two n values with at least five seeds each.
    """
    if isinstance(rows_or_path, (str, os.PathLike)):
        with open(rows_or_path) as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = rows_or_path
    groups = {}
    d_block = 1
    for row in rows:
        if row["metric_name"] != metric or row["status"] != "ok":
            continue
        n = int(row["n"])
        d_block = int(row["d"])
        groups.setdefault(n, []).append(float(row["metric_value"]))
    if len(groups) < 2:
        raise ConfigError("results", "need at least two n values to summarize")
    for n, vals in groups.items():
        if len(vals) < 5:
            raise ConfigError("results", f"need >= 5 seeds per n, n={n} has {len(vals)}")

    ns = sorted(groups)
    stats = []
    for n in ns:
        vals = np.asarray(groups[n])
        stats.append({
            "n": n,
            "seeds": vals.size,
            "mean": float(vals.mean()),
            "se": float(vals.std(ddof=1) / math.sqrt(vals.size)),
        })
    monotone = all(
        stats[i + 1]["mean"]
        <= stats[i]["mean"] + math.hypot(stats[i]["se"], stats[i + 1]["se"])
        for i in range(len(stats) - 1)
    )
    gamma = rate_exponent(d_block, r)
    x = np.array([math.log(s["n"]) ** -gamma for s in stats])
    y = np.array([s["mean"] for s in stats])
    coefficient = float((x @ y) / (x @ x))
    return {
        "per_n": stats,
        "monotone_within_1se": monotone,
        "decay_exponent": gamma,
        "fit_coefficient": coefficient,
    }


# ---------------------------------------------------------------------------
# plotting (never fails the run)
# ---------------------------------------------------------------------------

def _maybe_plot(path, xs, ys, xlabel, ylabel, logx=False):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.plot(xs, ys, "o-")
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    except Exception as exc:  # plotting is best-effort by design
        print(f"note: plot {path} skipped ({exc})", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _ensure_out(out_dir, force, *names):
    os.makedirs(out_dir, exist_ok=True)
    for name in names:
        path = os.path.join(out_dir, name)
        if os.path.exists(path) and not force:
            raise ConfigError(path, "output exists; pass --force to overwrite")


def _cmd_simulate(args):
    cfg = load_config(args.config)
    if isinstance(cfg, ExperimentPlan):
        raise ConfigError(args.config, "got an experiment plan; use `sweep`")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.strategy is not None:
        cfg = replace(cfg, strategy=args.strategy)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    elif cfg.workers is None and "CMVSIM_WORKERS" in os.environ:
        cfg = replace(cfg, workers=default_workers())
    cfg = cfg.resolve()
    out = args.out or "."
    _ensure_out(out, args.force, "config.yaml", "diagnostics.csv")
    traj = simulate.run(cfg)
    digest = cfg.digest()
    with open(os.path.join(out, "config.yaml"), "w") as fh:
        fh.write(emit_config(cfg))
    for t, positions in traj.snapshots:
        stem = f"snapshot_t{t:g}"
        _ensure_out(out, args.force, stem + ".bin")
        ens = simulate.ParticleEnsemble(positions, t=t)
        simulate.write_snapshot(os.path.join(out, stem + ".bin"), ens, cfg.seed, digest)
        if args.csv_snapshots:
            simulate.ensemble_to_csv(os.path.join(out, stem + ".csv"), ens)
    with open(os.path.join(out, "diagnostics.csv"), "w", newline="") as fh:
        if traj.diagnostics:
            writer = csv.DictWriter(fh, fieldnames=list(traj.diagnostics[0]))
            writer.writeheader()
            writer.writerows(traj.diagnostics)
        else:
            fh.write("step,t,drift_max\n")
    print(f"simulate: n={cfg.n} T={cfg.T} steps={int(round(cfg.T / cfg.dt))} -> {out}")
    return 0


def _cmd_sweep(args):
    plan = load_config(args.config)
    if isinstance(plan, SimConfig):
        plan = ExperimentPlan(base=plan)
    if args.auto_schedule:
        base = plan.base
        if base.h is not None or base.epsilon is not None:
            base = replace(base, h=None, epsilon=None)
        if args.r is not None:
            base = replace(base, schedule_r=args.r)
        if args.C is not None:
            base = replace(base, schedule_C=args.C)
        plan = replace(plan, base=base)
    out = args.out or "."
    _ensure_out(out, args.force, "results.csv")
    workers = args.workers if args.workers is not None else default_workers()
    rows = run_sweep(plan, workers=workers)
    _write_rows(os.path.join(out, "results.csv"), rows)
    print(f"sweep: {len(plan.cells())} cells -> {os.path.join(out, 'results.csv')}")
    seeds_per_n = {}
    for row in rows:
        if row["metric_name"] == "histogram_tv_oracle" and row["status"] == "ok":
            seeds_per_n.setdefault(int(row["n"]), set()).add(row["seed"])
    if len(seeds_per_n) >= 2 and all(len(s) >= 5 for s in seeds_per_n.values()):
        summary = report_convergence(rows, r=plan.base.schedule_r)
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
        verdict = "nonincreasing" if summary["monotone_within_1se"] else "NOT nonincreasing"
        print(f"convergence: mean TV {verdict} in n (within 1 SE)")
        for s in summary["per_n"]:
            print(f"  n={s['n']:>8d}  mean={s['mean']:.4f}  se={s['se']:.4f}  seeds={s['seeds']}")
        if args.plots:
            _maybe_plot(
                os.path.join(out, "tv_vs_n.svg"),
                [s["n"] for s in summary["per_n"]],
                [s["mean"] for s in summary["per_n"]],
                "n", "histogram TV to oracle", logx=True,
            )
    if args.plots and "epsilon" in plan.axes:
        by_eps = {}
        for row in rows:
            if row["metric_name"] == "floor_hit_rate_b0" and row["status"] == "ok":
                by_eps.setdefault(float(row["epsilon"]), []).append(
                    float(row["metric_value"])
                )
        if len(by_eps) >= 2:
            eps_sorted = sorted(by_eps)
            _maybe_plot(
                os.path.join(out, "floor_hit_vs_epsilon.svg"),
                eps_sorted, [float(np.mean(by_eps[e])) for e in eps_sorted],
                "epsilon", "terminal floor hit rate (block 0)", logx=True,
            )
    return 0


def _cmd_check_assumptions(args):
    status = 0
    for kid in KERNEL_IDS:
        kernel = get_kernel(kid, 1)
        rep = check_assumption_K(kernel, points=args.points)
        flag = "ok" if rep.passed else "FAIL"
        print(
            f"kernel {kid}: {flag} mass={rep.mass:.9f} |mean|={abs(float(rep.mean[0])):.2e} "
            f"exp_moment={rep.exp_moment:.6f} asym={rep.max_asymmetry:.2e}"
        )
        status |= 0 if rep.passed else 1
    law = standard_normal_law(1)
    kernel = get_kernel(args.kernel, 1)
    rep = check_assumption_R(law, args.h, kernel)
    r1 = ", ".join(
        f"i={i}: {'%.6g' % v if f else 'divergent'}"
        for i, (v, f) in enumerate(zip(rep.r1_values, rep.r1_finite))
    )
    print(
        f"initial law N(0,1), kernel={args.kernel}, h={args.h}: "
        f"shift-D4 integral [{r1}]; "
        f"log-moments ({rep.r3_abs_log:.6f}, {rep.r3_score_fourth:.6f}, "
        f"{rep.r3_laplacian_ratio:.6f}); sup-density {rep.r4_sup_density:.6f}"
    )
    return status


def _cmd_divergence(args):
    if args.suite == "inequalities":
        report = divergences.inequality_suite(
            args.trials, seed=args.seed, keep_rows=args.out is not None
        )
        print(
            f"inequality suite: {report.trials} trials, {report.checks} checks, "
            f"{len(report.violations)} violations"
        )
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            report.to_csv(os.path.join(args.out, "inequalities.csv"))
        for v in report.violations[:10]:
            print(f"  VIOLATION {v['quantity']} trial={v['trial']} lhs={v['lhs']} rhs={v['rhs']}")
        return 0 if report.ok else 1
    # mollification table
    kernel = get_kernel(args.kernel, 1)
    law = standard_normal_law(1)

    def density(x):
        return law.pdf(x[:, None])

    hs = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001]
    print("h, entropy, entropy/h^2")
    values = []
    for h in hs:
        val = divergences.mollification_entropy(density, kernel, h)
        values.append(val)
        print(f"{h:g}, {val:.10e}, {val / h**2:.6f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "mollification.csv"), "w") as fh:
            fh.write("h,entropy,entropy_over_h2\n")
            for h, val in zip(hs, values):
                fh.write(f"{h!r},{val!r},{val / h**2!r}\n")
        if args.plots:
            _maybe_plot(
                os.path.join(args.out, "mollification_vs_h.svg"),
                hs, values, "h", "KL(p || p*K_h)", logx=True,
            )
    return 0


def _cmd_rate(args):
    point = _schedule_point(args.n, args.d, args.r, args.C, k=args.k)
    val = rate_bound(
        point.h, point.epsilon, args.n, args.d, args.k, args.r, args.C
    )
    print(
        f"schedule: n={args.n} d={args.d} r={args.r} C={args.C} -> "
        f"h={point.h:.6f} epsilon={point.epsilon:.6f} bound={val:.6g}"
    )
    if args.optimize:
        h_grid = np.geomspace(args.h_min, args.h_max, args.grid)
        eps_grid = np.geomspace(args.eps_min, args.eps_max, args.grid)
        h_star, eps_star, best, interior = optimize_rate(
            args.n, args.d, args.k, args.r, args.C, h_grid, eps_grid
        )
        where = "interior" if interior else "ON GRID BOUNDARY"
        print(f"grid optimum: h={h_star:.6f} epsilon={eps_star:.6f} bound={best:.6g} ({where})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cmvsim",
        description="Interacting-particle simulation of conditional mean-field SDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one config")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out")
    p_sim.add_argument("--workers", type=int)
    p_sim.add_argument("--strategy", choices=["naive", "celllist"])
    p_sim.add_argument("--force", action="store_true")
    p_sim.add_argument("--csv-snapshots", action="store_true")
    p_sim.set_defaults(func=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run an experiment plan")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--workers", type=int)
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.add_argument("--auto-schedule", action="store_true")
    p_sweep.add_argument("--r", type=float)
    p_sweep.add_argument("--C", type=float)
    p_sweep.add_argument("--plots", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_chk = sub.add_parser("check-assumptions", help="kernel and initial-law reports")
    p_chk.add_argument("--kernel", default="gaussian", choices=list(KERNEL_IDS))
    p_chk.add_argument("--h", type=float, default=0.01)
    p_chk.add_argument("--points", type=int, default=20_001)
    p_chk.set_defaults(func=_cmd_check_assumptions)

    p_div = sub.add_parser("divergence", help="inequality suite / mollification tables")
    p_div.add_argument("--suite", choices=["inequalities", "mollification"],
                       default="inequalities")
    p_div.add_argument("--trials", type=int, default=10_000)
    p_div.add_argument("--seed", type=int, default=0)
    p_div.add_argument("--kernel", default="gaussian", choices=list(KERNEL_IDS))
    p_div.add_argument("--out")
    p_div.add_argument("--plots", action="store_true")
    p_div.set_defaults(func=_cmd_divergence)

    p_rate = sub.add_parser("rate", help="schedule and rate-bound tables")
    p_rate.add_argument("--n", type=int, required=True)
    p_rate.add_argument("--d", type=int, default=1)
    p_rate.add_argument("--k", type=int, default=1)
    p_rate.add_argument("--r", type=float, default=0.5)
    p_rate.add_argument("--C", type=float, default=1.0)
    p_rate.add_argument("--optimize", action="store_true")
    p_rate.add_argument("--grid", type=int, default=50)
    p_rate.add_argument("--h-min", type=float, default=1e-2)
    p_rate.add_argument("--h-max", type=float, default=1.0)
    p_rate.add_argument("--eps-min", type=float, default=1e-4)
    p_rate.add_argument("--eps-max", type=float, default=1.0)
    p_rate.set_defaults(func=_cmd_rate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "key": exc.key, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except SimulationDivergedError as exc:
        print(json.dumps({"error": "diverged", "step": exc.step, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
