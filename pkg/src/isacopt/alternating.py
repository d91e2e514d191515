"""Alternating optimization of the precoder and the surface phases.

One outer iteration rebuilds the objective matrix from the current phases,
solves the relaxed precoder problem, recovers a precoder by randomization,
then updates the phases.  Termination follows the relative-change rule
|g(t+1) - g(t)| / g(t) <= eps_rel, checked from the second outer iteration
on, with a hard iteration cap.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SolverError
from .irs import solve_irs_manifold, solve_irs_minorization
from .objective import (IrsPhase, Precoder, build_omega, snr_comm, snr_radar)
from .precoder import (default_beampattern_target, factor_precoder,
                       precoder_objective, relaxed_objective, solve_relaxed,
                       validate_beampattern_target)
from .scene import ChannelSet, SceneConfig

log = logging.getLogger(__name__)

IRS_METHODS = ("minorization", "manifold")
THETA_INITS = ("ones", "random")


@dataclass
class SolverOptions:
    """Knobs of the alternating loop and its sub-solvers."""

    eps_rel: float = 0.01        # relative-change stopping threshold
    t_max: int = 20              # outer iteration cap
    n_g: int = 100               # randomization samples per precoder recovery
    inner_tol: float = 1e-6
    inner_max: int = 200
    seed: int = 0
    irs_method: str = "minorization"
    irs_inner: bool = False      # run the phase solver to inner convergence
    safeguard: bool = True       # ascent-guaranteed phase update
    keep_best_precoder: bool = True
    theta_init: str = "ones"
    dykstra_max_cycles: int = 500
    dykstra_tol: float = 1e-8

    def __post_init__(self):
        if self.eps_rel <= 0:
            raise ConfigError(f"eps_rel must be positive, got {self.eps_rel}")
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.n_g < 1:
            raise ConfigError(f"n_g must be >= 1, got {self.n_g}")
        if self.inner_max < 1:
            raise ConfigError(f"inner_max must be >= 1, got {self.inner_max}")
        if self.irs_method not in IRS_METHODS:
            raise ConfigError(f"irs_method must be one of {IRS_METHODS}")
        if self.theta_init not in THETA_INITS:
            raise ConfigError(f"theta_init must be one of {THETA_INITS}")


@dataclass
class RunTrace:
    """Per-outer-iteration record of one alternating run."""

    objective_per_outer: list[float] = field(default_factory=list)
    snr_radar_per_outer: list[float] = field(default_factory=list)
    snr_comm_per_outer: list[float] = field(default_factory=list)
    relaxed_bound_per_outer: list[float] = field(default_factory=list)
    precoder_obj_per_outer: list[float] = field(default_factory=list)
    wall_time_per_stage: list[dict[str, float]] = field(default_factory=list)
    precoder_dips: list[int] = field(default_factory=list)
    terminated_by: str = ""


def objective_snapshot(p: Precoder, theta: IrsPhase, ch: ChannelSet,
                       cfg: SceneConfig) -> tuple[float, float, float]:
    """(weighted objective, radar SNR, communication SNR) at (P, theta)."""
    s_r = snr_radar(p, theta, ch, cfg)
    s_c = snr_comm(p, theta, ch, cfg)
    return cfg.beta * s_r + (1.0 - cfg.beta) * s_c, s_r, s_c


def initial_phases(cfg: SceneConfig, opts: SolverOptions,
                   rng: np.random.Generator) -> IrsPhase:
    if opts.theta_init == "ones":
        return IrsPhase(np.ones(cfg.n_irs, dtype=complex))
    return IrsPhase(np.exp(2j * np.pi * rng.random(cfg.n_irs)))


def run_alternating(ch: ChannelSet, cfg: SceneConfig,
                    r_d: np.ndarray | None = None,
                    opts: SolverOptions | None = None,
                    rng: np.random.Generator | None = None
                    ) -> tuple[Precoder, IrsPhase, RunTrace]:
    """Alternate the two sub-problems until the stopping rule fires.

    Returns the final precoder, phases and the run trace.  Sub-solver
    failures propagate as SolverError with the failing stage named.
    """
    opts = opts or SolverOptions()
    if r_d is None:
        r_d = default_beampattern_target(cfg)
    validate_beampattern_target(r_d, cfg)
    rng = rng if rng is not None else np.random.default_rng(opts.seed)

    theta = initial_phases(cfg, opts, rng)
    trace = RunTrace()
    s_warm = r_d
    precoder: Precoder | None = None

    for t in range(1, opts.t_max + 1):
        times: dict[str, float] = {}
        try:
            tic = time.perf_counter()
            omega = build_omega(theta, ch, cfg)
            times["omega"] = time.perf_counter() - tic

            tic = time.perf_counter()
            relaxed = solve_relaxed(omega, cfg, r_d, s0=s_warm,
                                    dykstra_cycles=opts.dykstra_max_cycles,
                                    dykstra_tol=opts.dykstra_tol)
            s_warm = relaxed.s
            times["precoder"] = time.perf_counter() - tic

            tic = time.perf_counter()
            candidate = factor_precoder(relaxed, cfg.n_users, omega, cfg, r_d,
                                        rng, opts.n_g)
            if (opts.keep_best_precoder and precoder is not None
                    and precoder_objective(precoder, omega)
                    > precoder_objective(candidate, omega)):
                # randomization fell short of the incumbent; keep it
                trace.precoder_dips.append(t)
                log.debug("outer %d: randomized precoder scored below the "
                          "previous one; keeping the incumbent", t)
            else:
                precoder = candidate
            times["randomization"] = time.perf_counter() - tic

            tic = time.perf_counter()
            inner_cap = opts.inner_max if (opts.irs_inner
                                           or opts.irs_method == "manifold") else 1
            if opts.irs_method == "minorization":
                theta, _ = solve_irs_minorization(
                    theta, precoder, ch, cfg, inner_tol=opts.inner_tol,
                    inner_max=inner_cap, safeguard=opts.safeguard)
            else:
                theta, _ = solve_irs_manifold(
                    theta, precoder, ch, cfg, inner_tol=opts.inner_tol,
                    inner_max=inner_cap)
            times["irs"] = time.perf_counter() - tic
        except SolverError as exc:
            exc.args = (f"outer iteration {t}: {exc.args[0] if exc.args else exc}",
                        *exc.args[1:])
            raise

        g, s_r, s_c = objective_snapshot(precoder, theta, ch, cfg)
        trace.objective_per_outer.append(g)
        trace.snr_radar_per_outer.append(s_r)
        trace.snr_comm_per_outer.append(s_c)
        trace.relaxed_bound_per_outer.append(relaxed_objective(relaxed, omega))
        trace.precoder_obj_per_outer.append(precoder_objective(precoder, omega))
        trace.wall_time_per_stage.append(times)

        if t >= 2:
            prev = trace.objective_per_outer[-2]
            if abs(g - prev) <= opts.eps_rel * max(abs(prev), 1e-300):
                trace.terminated_by = "tolerance"
                break
    if not trace.terminated_by:
        trace.terminated_by = "t_max"
    return precoder, theta, trace
