"""Experiment harness: seeded studies with CSV output and JSON sidecars.

Four experiment kinds:

* ``convergence`` - objective trajectories of the alternating loop over a
  sweep of radar weights, aggregated over seeded trials.
* ``scaling``     - final objective and phase-stage wall time of both phase
  solvers as the surface size grows.
* ``ratio``       - Gaussian-randomization approximation ratio versus the
  number of randomized samples, against the unit-diagonal relaxation bound.
* ``bench``       - micro-benchmarks of the numerical kernels.

Every primary CSV is deterministic for a fixed config and master seed;
wall-clock measurements are written to separate ``*_timing.csv`` files that
are excluded from the determinism contract.  Each CSV gets a ``.meta.json``
sidecar with the fully resolved configuration and its content hash.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__ as _version
from .alternating import SolverOptions, run_alternating
from .errors import ConfigError, SolverError
from .irs import build_quadratic_terms, irs_phase_update
from .objective import quartic_kernels, quartic_kernels_reference
from .precoder import (approximation_ratio_study, default_beampattern_target,
                       dykstra_project, solve_unit_diag_relaxation)
from .scene import (SceneConfig, complex_normal, make_channels,
                    scene_config_from_dict)

log = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("convergence", "scaling", "ratio", "bench")


@dataclass
class ExperimentSpec:
    """One experiment: kind, scene, solver knobs, sweeps and bookkeeping."""

    kind: str
    scene: SceneConfig = field(default_factory=SceneConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    beta_values: list[float] = field(default_factory=list)
    l_values: list[int] = field(default_factory=list)
    n_g_grid: list[int] = field(default_factory=list)
    trials: int = 1
    master_seed: int = 0
    output_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"kind must be one of {EXPERIMENT_KINDS}, got '{self.kind}'")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.kind == "convergence" and not self.beta_values:
            raise ConfigError("convergence experiment needs a non-empty beta_values sweep")
        if self.kind in ("scaling", "ratio") and not self.l_values:
            raise ConfigError(f"{self.kind} experiment needs a non-empty l_values sweep")
        if self.kind == "ratio" and not self.n_g_grid:
            raise ConfigError("ratio experiment needs a non-empty n_g_grid")


@dataclass
class AggregateResult:
    """Aggregated outcome of one experiment."""

    kind: str
    points: list[dict] = field(default_factory=list)
    timing: list[dict] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    trial_errors: list[str] = field(default_factory=list)

    def __post_init__(self):
        for row in self.points:
            for key, value in row.items():
                if key.startswith("var_") and value < 0:
                    raise ConfigError(f"negative variance in column {key}")


def load_experiment_spec(source: str | Path | dict) -> ExperimentSpec:
    """Build an ExperimentSpec from a JSON file or a parsed dict."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{source}: not valid JSON ({exc})") from exc
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("experiment spec must be a JSON object")
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"experiment spec: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    if "scene" in kwargs:
        kwargs["scene"] = scene_config_from_dict(kwargs["scene"])
    if "solver" in kwargs:
        kwargs["solver"] = solver_options_from_dict(kwargs["solver"])
    return ExperimentSpec(**kwargs)


def solver_options_from_dict(raw: dict) -> SolverOptions:
    """SolverOptions from a JSON-style dict; eps_rel may be given in dB."""
    from .scene import _convert_suffixed
    names = {f.name for f in fields(SolverOptions)}
    return SolverOptions(**_convert_suffixed(raw, names, "solver config"))


def resolved_spec_dict(spec: ExperimentSpec) -> dict:
    """Plain-JSON view of the fully resolved experiment configuration."""
    out = dataclasses.asdict(spec)
    alpha = out["scene"]["alpha"]
    out["scene"]["alpha"] = [alpha.real, alpha.imag]
    return out


def config_hash(spec: ExperimentSpec) -> str:
    blob = json.dumps(resolved_spec_dict(spec), sort_keys=True,
                      separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# --- CSV plumbing ----------------------------------------------------------

def format_cell(value) -> str:
    """Lossless cell format: floats use shortest round-trip repr."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows, spec: ExperimentSpec) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    meta = {
        "columns": header,
        "config": resolved_spec_dict(spec),
        "config_sha256": config_hash(spec),
        "package": f"isacopt {_version}",
    }
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_csv_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


# --- per-trial machinery ----------------------------------------------------

def _trial_rng(master_seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, point, trial]))


def _randomize_alpha(cfg: SceneConfig, rng: np.random.Generator) -> SceneConfig:
    """Fresh uniform phase for the round-trip coefficient, magnitude kept."""
    phase = np.exp(2j * np.pi * rng.random())
    return replace(cfg, alpha=abs(cfg.alpha) * phase)


def near_square_grid(l_total: int) -> tuple[int, int]:
    """Factor L into (rows, cols) with rows the largest divisor <= sqrt(L)."""
    if l_total < 1:
        raise ConfigError(f"surface size must be >= 1, got {l_total}")
    rows = 1
    for d in range(1, int(math.isqrt(l_total)) + 1):
        if l_total % d == 0:
            rows = d
    return rows, l_total // rows


def _convergence_trial(args):
    cfg, opts, master_seed, point, trial = args
    rng = _trial_rng(master_seed, point, trial)
    cfg = _randomize_alpha(cfg, rng)
    ch = make_channels(cfg, rng)
    _, _, trace = run_alternating(ch, cfg, opts=opts, rng=rng)
    stage_totals: dict[str, float] = {}
    for stage_times in trace.wall_time_per_stage:
        for stage, seconds in stage_times.items():
            stage_totals[stage] = stage_totals.get(stage, 0.0) + seconds
    return {
        "trial": trial,
        "objectives": trace.objective_per_outer,
        "snr_radar": trace.snr_radar_per_outer,
        "snr_comm": trace.snr_comm_per_outer,
        "terminated_by": trace.terminated_by,
        "stage_totals": stage_totals,
    }


def _scaling_trial(args):
    cfg, opts, master_seed, point, trial = args
    rng = _trial_rng(master_seed, point, trial)
    cfg = _randomize_alpha(cfg, rng)
    ch = make_channels(cfg, rng)
    solver_seeds = np.random.SeedSequence([master_seed, point, trial, 1]).spawn(2)
    out = {}
    for method, seed in zip(("minorization", "manifold"), solver_seeds):
        method_opts = replace(opts, irs_method=method, irs_inner=True)
        tic = time.perf_counter()
        _, _, trace = run_alternating(ch, cfg, opts=method_opts,
                                      rng=np.random.default_rng(seed))
        total = time.perf_counter() - tic
        irs_time = sum(t.get("irs", 0.0) for t in trace.wall_time_per_stage)
        out[method] = {
            "trial": trial,
            "final_objective": trace.objective_per_outer[-1],
            "outer_iterations": len(trace.objective_per_outer),
            "irs_time": irs_time,
            "irs_time_per_outer": irs_time / len(trace.objective_per_outer),
            "total_time": total,
        }
    return out


def _ratio_trial(args):
    cfg, opts, n_g_grid, master_seed, point, trial = args
    rng = _trial_rng(master_seed, point, trial)
    cfg = _randomize_alpha(cfg, rng)
    ch = make_channels(cfg, rng)
    precoder, _, _ = run_alternating(ch, cfg, opts=opts, rng=rng)
    a_mat, _ = build_quadratic_terms(precoder, ch, cfg)
    r_star = solve_unit_diag_relaxation(a_mat)
    reports = approximation_ratio_study(a_mat, r_star, n_g_grid, rng)
    return {
        "trial": trial,
        "reports": [(r.n_samples, r.ratio, r.best_objective, r.sdp_objective)
                    for r in reports],
    }


def _run_trials(worker, arg_list, threads: int, errors: list[str]):
    """Run trial workers, in order, optionally across processes."""
    results = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = list(pool.map(_guarded(worker), arg_list))
        raw = futures
    else:
        raw = [_guarded(worker)(args) for args in arg_list]
    for outcome in raw:
        if isinstance(outcome, str):
            errors.append(outcome)
            log.warning("trial skipped: %s", outcome)
        else:
            results.append(outcome)
    return results


class _guarded:
    """Wrap a trial worker so solver failures skip the trial, not the run."""

    def __init__(self, worker):
        self.worker = worker

    def __call__(self, args):
        try:
            return self.worker(args)
        except SolverError as exc:
            return f"{self.worker.__name__}{args[-2:]}: {exc}"


# --- aggregation (shared by writers and verification) -----------------------

def aggregate_convergence(curves: list[list[float]]) -> list[tuple]:
    """Per-iteration mean/variance/std with last-value carry-forward padding.

    Rows: (iteration, mean, variance, std, n_trials).
    """
    if not curves:
        return []
    t_max = max(len(c) for c in curves)
    padded = np.array([list(c) + [c[-1]] * (t_max - len(c)) for c in curves])
    mean = padded.mean(axis=0)
    var = padded.var(axis=0)
    std = np.sqrt(var)
    n = padded.shape[0]
    return [(i + 1, float(mean[i]), float(var[i]), float(std[i]), n)
            for i in range(t_max)]


def aggregate_mean_var(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.var())


# --- experiments ------------------------------------------------------------

def run_convergence_experiment(spec: ExperimentSpec) -> AggregateResult:
    """Objective trajectories per radar weight; one CSV pair per weight."""
    out_dir = Path(spec.output_dir)
    result = AggregateResult(kind="convergence")
    for point, beta in enumerate(spec.beta_values):
        cfg = replace(spec.scene, beta=float(beta))
        args = [(cfg, spec.solver, spec.master_seed, point, t)
                for t in range(spec.trials)]
        trials = _run_trials(_convergence_trial, args, spec.threads,
                             result.trial_errors)
        tag = f"beta{beta:g}"

        raw_rows = []
        for tr in trials:
            for i, (g, sr, sc) in enumerate(zip(tr["objectives"],
                                                tr["snr_radar"],
                                                tr["snr_comm"])):
                raw_rows.append((tr["trial"], i + 1, g, sr, sc))
        raw_path = write_csv(
            out_dir / f"convergence_raw_{tag}.csv",
            ["trial", "iteration", "objective", "snr_radar", "snr_comm"],
            raw_rows, spec)

        agg_rows = aggregate_convergence([tr["objectives"] for tr in trials])
        agg_path = write_csv(
            out_dir / f"convergence_{tag}.csv",
            ["iteration", "mean_objective", "var_objective", "std_objective",
             "n_trials"],
            agg_rows, spec)

        stages = sorted({s for tr in trials for s in tr["stage_totals"]})
        timing_rows = []
        for stage in stages:
            mean, var = aggregate_mean_var(
                [tr["stage_totals"].get(stage, 0.0) for tr in trials])
            timing_rows.append((stage, mean, var, len(trials)))
        timing_path = write_csv(
            out_dir / f"convergence_timing_{tag}.csv",
            ["stage", "mean_seconds", "var_seconds", "n_trials"],
            timing_rows, spec)

        result.files += [str(raw_path), str(agg_path), str(timing_path)]
        for row in agg_rows:
            result.points.append({
                "beta": float(beta), "iteration": row[0],
                "mean_objective": row[1], "var_objective": row[2],
                "n_trials": row[4]})
        for stage, mean, var, n in timing_rows:
            result.timing.append({"beta": float(beta), "stage": stage,
                                  "mean_seconds": mean, "var_seconds": var})
        log.info("convergence beta=%g: %d/%d trials ok", beta, len(trials),
                 spec.trials)
    return result


def run_scaling_experiment(spec: ExperimentSpec) -> AggregateResult:
    """Both phase solvers inside the full loop as the surface size grows."""
    out_dir = Path(spec.output_dir)
    result = AggregateResult(kind="scaling")
    raw_rows, raw_timing_rows, agg_rows, timing_rows = [], [], [], []
    l0 = float(spec.l_values[0])
    for point, l_total in enumerate(spec.l_values):
        rows_, cols_ = near_square_grid(int(l_total))
        cfg = replace(spec.scene, irs_rows=rows_, irs_cols=cols_)
        args = [(cfg, spec.solver, spec.master_seed, point, t)
                for t in range(spec.trials)]
        trials = _run_trials(_scaling_trial, args, spec.threads,
                             result.trial_errors)
        ipm_ref = (float(l_total) / l0) ** 3.5
        for method in ("minorization", "manifold"):
            per = [tr[method] for tr in trials]
            for rec in per:
                raw_rows.append((l_total, method, rec["trial"],
                                 rec["final_objective"], rec["outer_iterations"]))
                raw_timing_rows.append((l_total, method, rec["trial"],
                                        rec["irs_time"], rec["irs_time_per_outer"],
                                        rec["total_time"]))
            mean_obj, var_obj = aggregate_mean_var(
                [r["final_objective"] for r in per])
            mean_outer, _ = aggregate_mean_var(
                [r["outer_iterations"] for r in per])
            agg_rows.append((l_total, method, mean_obj, var_obj, mean_outer,
                             len(per), ipm_ref))
            mean_irs, var_irs = aggregate_mean_var([r["irs_time"] for r in per])
            mean_per_outer, _ = aggregate_mean_var(
                [r["irs_time_per_outer"] for r in per])
            mean_total, _ = aggregate_mean_var([r["total_time"] for r in per])
            timing_rows.append((l_total, method, mean_irs, var_irs,
                                mean_per_outer, mean_total, len(per)))
        log.info("scaling L=%d: %d/%d trials ok", l_total, len(trials),
                 spec.trials)
    result.files.append(str(write_csv(
        out_dir / "scaling_raw.csv",
        ["l", "method", "trial", "final_objective", "outer_iterations"],
        raw_rows, spec)))
    result.files.append(str(write_csv(
        out_dir / "scaling.csv",
        ["l", "method", "mean_final_objective", "var_final_objective",
         "mean_outer_iterations", "n_trials", "ipm_cost_ref_l35"],
        agg_rows, spec)))
    result.files.append(str(write_csv(
        out_dir / "scaling_raw_timing.csv",
        ["l", "method", "trial", "irs_seconds", "irs_seconds_per_outer",
         "total_seconds"],
        raw_timing_rows, spec)))
    result.files.append(str(write_csv(
        out_dir / "scaling_timing.csv",
        ["l", "method", "mean_irs_seconds", "var_irs_seconds",
         "mean_irs_seconds_per_outer", "mean_total_seconds", "n_trials"],
        timing_rows, spec)))
    for row in agg_rows:
        result.points.append({"l": row[0], "method": row[1],
                              "mean_final_objective": row[2],
                              "var_final_objective": row[3],
                              "n_trials": row[5]})
    for row in timing_rows:
        result.timing.append({"l": row[0], "method": row[1],
                              "mean_irs_seconds": row[2],
                              "mean_irs_seconds_per_outer": row[4],
                              "mean_total_seconds": row[5]})
    return result


def run_ratio_experiment(spec: ExperimentSpec) -> AggregateResult:
    """Randomization approximation ratio over the sample-count grid."""
    out_dir = Path(spec.output_dir)
    result = AggregateResult(kind="ratio")
    raw_rows, agg_rows = [], []
    for point, l_total in enumerate(spec.l_values):
        rows_, cols_ = near_square_grid(int(l_total))
        cfg = replace(spec.scene, irs_rows=rows_, irs_cols=cols_)
        args = [(cfg, spec.solver, list(spec.n_g_grid), spec.master_seed,
                 point, t) for t in range(spec.trials)]
        trials = _run_trials(_ratio_trial, args, spec.threads,
                             result.trial_errors)
        for tr in trials:
            for n_g, ratio, best, sdp in tr["reports"]:
                raw_rows.append((l_total, n_g, tr["trial"], ratio, best, sdp))
        for gi, n_g in enumerate(spec.n_g_grid):
            ratios = [tr["reports"][gi][1] for tr in trials]
            mean, var = aggregate_mean_var(ratios)
            agg_rows.append((l_total, int(n_g), mean, var, len(ratios)))
        log.info("ratio L=%d: %d/%d trials ok", l_total, len(trials),
                 spec.trials)
    result.files.append(str(write_csv(
        out_dir / "ratio_raw.csv",
        ["l", "n_g", "trial", "ratio", "best_objective", "sdp_objective"],
        raw_rows, spec)))
    result.files.append(str(write_csv(
        out_dir / "ratio.csv",
        ["l", "n_g", "mean_ratio", "var_ratio", "n_trials"],
        agg_rows, spec)))
    for row in agg_rows:
        result.points.append({"l": row[0], "n_g": row[1], "mean_ratio": row[2],
                              "var_ratio": row[3], "n_trials": row[4]})
    return result


def run_bench(spec: ExperimentSpec) -> AggregateResult:
    """Micro-benchmarks: kernel equivalence and per-operation timings."""
    out_dir = Path(spec.output_dir)
    result = AggregateResult(kind="bench")
    rng = np.random.default_rng(spec.master_seed)
    check_rows, timing_rows = [], []
    reps = 100

    for l in (2, 4, 6, 8):
        x = complex_normal(rng, l, l)
        v = complex_normal(rng, l, l)
        w = complex_normal(rng, l, l)
        y_fast, z_fast = quartic_kernels(x, v, w)
        y_ref, z_ref = quartic_kernels_reference(x, v, w)
        err = max(
            np.linalg.norm(y_fast - y_ref) / max(np.linalg.norm(y_ref), 1e-300),
            np.linalg.norm(z_fast - z_ref) / max(np.linalg.norm(z_ref), 1e-300))
        check_rows.append(("quartic_kernels", l, "max_rel_error", err))
        timing_rows.append(("quartic_kernels", l, "fast",
                            _median_time(lambda: quartic_kernels(x, v, w), reps),
                            reps))
        timing_rows.append(("quartic_kernels", l, "kronecker",
                            _median_time(
                                lambda: quartic_kernels_reference(x, v, w), reps),
                            reps))

    l_irs = spec.scene.n_irs
    nu = complex_normal(rng, l_irs)
    eta = complex_normal(rng, l_irs)
    prev = np.exp(2j * np.pi * rng.random(l_irs))
    updated = irs_phase_update(nu, eta, prev)
    check_rows.append(("irs_phase_update", l_irs, "max_modulus_error",
                       float(np.max(np.abs(np.abs(updated.theta) - 1.0)))))
    timing_rows.append(("irs_phase_update", l_irs, "closed_form",
                        _median_time(lambda: irs_phase_update(nu, eta, prev),
                                     reps), reps))

    cfg = spec.scene
    r_d = default_beampattern_target(cfg)
    probe = r_d + 0.3 * np.eye(cfg.n_tx)
    projected = dykstra_project(probe, cfg, r_d)
    check_rows.append(("dykstra_project", cfg.n_tx, "trace_error",
                       abs(float(np.real(np.trace(projected)))
                           - cfg.power_budget)))
    timing_rows.append(("dykstra_project", cfg.n_tx, "cyclic",
                        _median_time(lambda: dykstra_project(probe, cfg, r_d),
                                     20), 20))

    result.files.append(str(write_csv(
        out_dir / "bench.csv", ["op", "size", "metric", "value"],
        check_rows, spec)))
    result.files.append(str(write_csv(
        out_dir / "bench_timing.csv",
        ["op", "size", "path", "median_seconds", "reps"],
        timing_rows, spec)))
    for op, size, metric, value in check_rows:
        result.points.append({"op": op, "size": size, metric: value})
    for op, size, path_name, seconds, n in timing_rows:
        result.timing.append({"op": op, "size": size, "path": path_name,
                              "median_seconds": seconds})
    return result


def _median_time(fn, reps: int) -> float:
    samples = []
    for _ in range(reps):
        tic = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - tic)
    return float(np.median(samples))


def run_experiment(spec: ExperimentSpec) -> AggregateResult:
    """Dispatch on the experiment kind."""
    runner = {
        "convergence": run_convergence_experiment,
        "scaling": run_scaling_experiment,
        "ratio": run_ratio_experiment,
        "bench": run_bench,
    }[spec.kind]
    return runner(spec)
