"""Precoder sub-problem: linear objective over an intersection of convex sets.

The relaxed covariance S = sum_k p_k p_k^H is optimized directly (the
objective and both constraints depend on the precoder only through S).  The
feasible set {S >= 0, tr(S) = P_T, ||S - R_D||_F^2 <= gamma_BP} is an
intersection of three sets with cheap individual projections, so the solve
is projected gradient ascent with Dykstra's cyclic projection; the problem
is convex, hence the limit is the global optimum.  A precoder is then
recovered by Gaussian randomization against the relaxed covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DykstraError, RandomizationInfeasibleError
from .objective import Precoder, hermitize
from .scene import SceneConfig, complex_normal, ula_steering


@dataclass
class RelaxedCovariance:
    """Optimizer of the relaxed (covariance-level) precoder problem."""

    s: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=complex)
        if self.s.ndim != 2 or self.s.shape[0] != self.s.shape[1]:
            raise ConfigError("relaxed covariance must be square")


@dataclass
class RandomizationReport:
    """Outcome of one Gaussian-randomization batch."""

    n_samples: int
    best_objective: float
    sdp_objective: float
    ratio: float

    def __post_init__(self):
        if self.ratio > 1.0 + 1e-9:
            raise ConfigError(
                f"approximation ratio {self.ratio} exceeds 1: the reference "
                f"covariance is not the relaxation optimum")


def project_psd(m: np.ndarray, herm_tol: float = 1e-10) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix (eigenvalue clamp)."""
    asym = np.linalg.norm(m - m.conj().T)
    if asym > herm_tol * max(1.0, np.linalg.norm(m)):
        raise ConfigError(f"input is not Hermitian (asymmetry {asym:.3e})")
    w, u = np.linalg.eigh(hermitize(m))
    w = np.maximum(w, 0.0)
    return hermitize((u * w) @ u.conj().T)


def project_trace(m: np.ndarray, target: float) -> np.ndarray:
    """Frobenius projection onto the hyperplane tr(M) = target."""
    n = m.shape[0]
    return m + ((target - np.trace(m)) / n) * np.eye(n)


def project_ball(m: np.ndarray, center: np.ndarray, radius2: float) -> np.ndarray:
    """Projection onto the Frobenius ball ||M - center||_F^2 <= radius2."""
    if radius2 <= 0:
        raise ConfigError(f"ball radius must be positive, got radius2={radius2}")
    diff = m - center
    dist2 = float(np.sum(np.abs(diff) ** 2))
    if dist2 <= radius2:
        return m
    return center + math.sqrt(radius2 / dist2) * diff


def _simplex_scaled(w: np.ndarray, target: float) -> np.ndarray:
    """Project a real vector onto {v >= 0, sum v = target}."""
    mu = np.sort(w)[::-1]
    cssv = np.cumsum(mu) - target
    ind = np.arange(1, w.size + 1)
    support = ind[mu - cssv / ind > 0][-1]
    tau = cssv[support - 1] / support
    return np.maximum(w - tau, 0.0)


def project_spectrahedron(m: np.ndarray, target: float) -> np.ndarray:
    """Exact Frobenius projection onto {S >= 0, tr S = target}.

    Eigendecompose and project the spectrum onto the scaled simplex; this
    fuses the cone and trace constraints into a single projection, which
    removes the slow cyclic tail those two sets exhibit jointly.
    """
    w, u = np.linalg.eigh(hermitize(m))
    return hermitize((u * _simplex_scaled(w, target)) @ u.conj().T)


def _dykstra(x0: np.ndarray, projections, residuals, max_cycles: int,
             tol: float) -> np.ndarray:
    """Dykstra's cyclic projection with correction terms.

    ``projections`` is a list of projection callables, ``residuals`` a list
    of callables returning a scaled constraint violation; iteration stops
    once every residual is below ``tol``.
    """
    x = x0
    corrections = [np.zeros_like(x0) for _ in projections]
    worst = math.inf
    for _ in range(max_cycles):
        for i, proj in enumerate(projections):
            shifted = x + corrections[i]
            x = proj(shifted)
            corrections[i] = shifted - x
        worst = max(res(x) for res in residuals)
        if worst < tol:
            return x
    raise DykstraError(
        f"cyclic projection did not reach tolerance {tol} within "
        f"{max_cycles} cycles (worst residual {worst:.3e})", worst)


def _feasibility_residuals(cfg: SceneConfig, r_d: np.ndarray):
    p_t, gamma = cfg.power_budget, cfg.beampattern_tol
    radius = math.sqrt(gamma)

    def res_psd(x):
        w = np.linalg.eigvalsh(hermitize(x))
        return max(0.0, -float(w[0])) / max(1.0, float(np.abs(w).max()))

    def res_trace(x):
        return abs(float(np.real(np.trace(x))) - p_t) / max(1.0, p_t)

    def res_ball(x):
        dist = float(np.linalg.norm(x - r_d))
        return max(0.0, dist - radius) / max(1.0, radius)

    return [res_psd, res_trace, res_ball]


def dykstra_project(m: np.ndarray, cfg: SceneConfig, r_d: np.ndarray,
                    max_cycles: int = 500, tol: float = 1e-8) -> np.ndarray:
    """Project onto {PSD} n {tr = P_T} n {Frobenius ball around R_D}.

    Cyclic projection with correction terms over the fused cone-and-trace
    set and the ball; the output violates each of the three constraints by
    less than ``tol`` (Frobenius-relative).
    """
    projections = [
        lambda x: project_spectrahedron(x, cfg.power_budget),
        lambda x: project_ball(x, r_d, cfg.beampattern_tol),
    ]
    return _dykstra(hermitize(m), projections,
                    _feasibility_residuals(cfg, r_d), max_cycles, tol)


def default_beampattern_target(cfg: SceneConfig) -> np.ndarray:
    """Desired transmit covariance: omni floor plus a beam toward the surface.

    R_D = (1 - mix) * (P_T/N) I + mix * P_T b b^H with b the normalized
    transmit steering vector toward the surface, then projected to be PSD
    with trace exactly P_T (feasible by construction).
    """
    n, p_t, mix = cfg.n_tx, cfg.power_budget, cfg.beampattern_mix
    b = ula_steering(cfg.radar_irs_azimuth, n, cfg.spacing_over_lambda)
    b = b / np.linalg.norm(b)
    r_d = (1.0 - mix) * (p_t / n) * np.eye(n) + mix * p_t * np.outer(b, b.conj())
    r_d = project_psd(hermitize(r_d))
    return r_d * (p_t / float(np.real(np.trace(r_d))))


def validate_beampattern_target(r_d: np.ndarray, cfg: SceneConfig):
    """The target must itself be feasible: PSD with trace P_T."""
    w = np.linalg.eigvalsh(hermitize(r_d))
    if w[0] < -1e-8 * max(1.0, float(np.abs(w).max())):
        raise ConfigError("desired covariance R_D is not positive semidefinite")
    if abs(float(np.real(np.trace(r_d))) - cfg.power_budget) > 1e-8 * cfg.power_budget:
        raise ConfigError("desired covariance R_D does not meet the power budget")


def _ascend_linear(objective_mat: np.ndarray, x0: np.ndarray, project,
                   gain_tol: float, max_steps: int,
                   step_cap: float = math.inf) -> np.ndarray:
    """Projected gradient ascent of tr(X A) with adaptive step doubling.

    The gradient is the constant matrix A, so the only tuning is the step;
    doubling on success drives the projection argument toward the face of
    the feasible set that maximizes the linear objective.  ``step_cap``
    bounds the step when far projections are expensive.
    """
    x = project(x0)
    f = float(np.real(np.vdot(objective_mat, x)))
    scale = float(np.linalg.norm(objective_mat))
    if scale == 0.0:
        return x
    step = min(1.0 / scale, step_cap)
    for _ in range(max_steps):
        improved = False
        for _ in range(40):
            trial = project(x + step * objective_mat)
            f_trial = float(np.real(np.vdot(objective_mat, trial)))
            if f_trial > f:
                improved = True
                break
            step *= 0.5
            if step * scale <= 1e-16:
                break
        if not improved:
            break
        gain = f_trial - f
        x, f = trial, f_trial
        step = min(step * 2.0, step_cap)
        if gain <= gain_tol * max(1.0, abs(f)):
            break
    return x


def solve_relaxed(omega: np.ndarray, cfg: SceneConfig, r_d: np.ndarray,
                  s0: np.ndarray | None = None, gain_tol: float = 1e-10,
                  max_steps: int = 1000, dykstra_cycles: int = 500,
                  dykstra_tol: float = 1e-8) -> RelaxedCovariance:
    """Maximize tr(S Omega) over the feasible covariance set.

    Monotone projected gradient ascent; the problem is convex (linear
    objective, convex set) so the returned point is globally optimal up to
    the projection and gain tolerances.
    """
    validate_beampattern_target(r_d, cfg)
    start = hermitize(s0) if s0 is not None else r_d

    def project(x):
        return dykstra_project(x, cfg, r_d, dykstra_cycles, dykstra_tol)

    s = _ascend_linear(hermitize(omega), start, project, gain_tol, max_steps)
    return RelaxedCovariance(s)


def relaxed_objective(s: RelaxedCovariance, omega: np.ndarray) -> float:
    """tr(S Omega), the relaxation bound on the precoder objective."""
    return float(np.real(np.vdot(omega, s.s)))


def precoder_objective(p: Precoder, omega: np.ndarray) -> float:
    """tr(P P^H Omega) for a concrete precoder."""
    return float(np.real(np.vdot(p.p, omega @ p.p)))


def factor_precoder(s: RelaxedCovariance, k: int, omega: np.ndarray,
                    cfg: SceneConfig, r_d: np.ndarray,
                    rng: np.random.Generator, n_g: int) -> Precoder:
    """Recover a K-column precoder from the relaxed covariance.

    Candidate 0 is the deterministic top-K eigenpair factorization; the
    remaining n_g candidates draw each column from CN(0, S/K).  Every
    candidate is rescaled to meet the power budget exactly, candidates
    violating the beampattern ball are discarded, and the feasible one
    with the largest objective wins.
    """
    if n_g < 1:
        raise ConfigError(f"randomization sample count must be >= 1, got {n_g}")
    n = s.s.shape[0]
    p_t, gamma = cfg.power_budget, cfg.beampattern_tol
    w, u = np.linalg.eigh(hermitize(s.s))
    w = np.maximum(w, 0.0)

    order = np.argsort(w)[::-1]
    lead = order[: min(k, n)]
    cand0 = np.zeros((n, k), dtype=complex)
    cand0[:, : lead.size] = u[:, lead] * np.sqrt(w[lead])

    half = u * np.sqrt(w / k)   # half @ z has covariance S/K for z ~ CN(0, I)

    best_p, best_obj = None, -math.inf
    for idx in range(n_g + 1):
        cand = cand0 if idx == 0 else half @ complex_normal(rng, n, k)
        pw = float(np.sum(np.abs(cand) ** 2))
        if pw <= 0.0:
            continue
        cand = cand * math.sqrt(p_t / pw)
        gram = cand @ cand.conj().T
        if float(np.sum(np.abs(gram - r_d) ** 2)) > gamma:
            continue
        obj = float(np.real(np.vdot(cand, omega @ cand)))
        if obj > best_obj:
            best_p, best_obj = cand, obj
    if best_p is None:
        raise RandomizationInfeasibleError("randomization infeasible")
    return Precoder(best_p)


def approximation_ratio_study(a: np.ndarray, r_star: np.ndarray,
                              n_g_grid, rng: np.random.Generator
                              ) -> list[RandomizationReport]:
    """Measure the randomization quality ratio against the relaxation bound.

    For each sample count, draw xi ~ CN(0, R*), map every draw to the
    unit-modulus vector exp(j arg(xi)), and report the best quadratic-form
    value relative to tr(A R*).  With R* the optimum of the unit-diagonal
    relaxation the ratio cannot exceed 1.
    """
    if np.max(np.abs(np.diagonal(r_star) - 1.0)) > 1e-6:
        raise ConfigError("reference covariance must have unit diagonal")
    a = hermitize(a)
    sdp_obj = float(np.real(np.vdot(a, r_star)))
    w, u = np.linalg.eigh(hermitize(r_star))
    half = u * np.sqrt(np.maximum(w, 0.0))
    reports = []
    for n_g in n_g_grid:
        if n_g < 1:
            raise ConfigError(f"sample count must be >= 1, got {n_g}")
        xi = half @ complex_normal(rng, r_star.shape[0], int(n_g))
        xi_hat = np.exp(1j * np.angle(xi))
        values = np.real(np.einsum("li,lm,mi->i", xi_hat.conj(), a, xi_hat))
        best = float(values.max())
        reports.append(RandomizationReport(
            n_samples=int(n_g), best_objective=best, sdp_objective=sdp_obj,
            ratio=best / sdp_obj))
    return reports


def _unit_diag_coordinate_ascent(a: np.ndarray, max_sweeps: int = 1000,
                                 tol: float = 1e-12) -> np.ndarray:
    """Row-by-row ascent on the full-rank factorization R = V^H V.

    Each column update v_i <- c_i / ||c_i|| with c_i = sum_{j != i} A_ij v_j
    maximizes the objective over that column alone, so sweeps are monotone;
    the iterate is PSD with exactly unit diagonal throughout.
    """
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    f = float(np.real(np.vdot(a, v.conj().T @ v)))
    for _ in range(max_sweeps):
        for i in range(n):
            c = v @ a[:, i] - a[i, i] * v[:, i]
            norm = float(np.linalg.norm(c))
            if norm > 1e-300:
                v[:, i] = c / norm
        f_new = float(np.real(np.vdot(a, v.conj().T @ v)))
        if abs(f_new - f) <= tol * max(1.0, abs(f)):
            break
        f = f_new
    return v.conj().T @ v


def solve_unit_diag_relaxation(a: np.ndarray, gain_tol: float = 1e-10,
                               max_steps: int = 8,
                               dykstra_cycles: int = 5000,
                               dykstra_tol: float = 1e-8) -> np.ndarray:
    """Maximize tr(A R) over {R >= 0, diag(R) = 1}.

    A factorized coordinate-ascent pass supplies a near-optimal warm start
    (cyclic projections are slow from far points), a short projected
    gradient ascent through the cone/diagonal cyclic projection polishes
    it, and a final congruence rescaling restores the unit diagonal
    exactly without leaving the cone.
    """
    a = hermitize(a)

    def project_diag(x):
        out = x.copy()
        np.fill_diagonal(out, 1.0)
        return out

    def res_psd(x):
        w = np.linalg.eigvalsh(hermitize(x))
        return max(0.0, -float(w[0])) / max(1.0, float(np.abs(w).max()))

    def res_diag(x):
        return float(np.max(np.abs(np.diagonal(x) - 1.0)))

    def project(x):
        return _dykstra(hermitize(x), [project_psd, project_diag],
                        [res_psd, res_diag], dykstra_cycles, dykstra_tol)

    start = _unit_diag_coordinate_ascent(a)
    scale = float(np.linalg.norm(a))
    cap = 2.0 / scale if scale > 0 else math.inf
    r = _ascend_linear(a, start, project, gain_tol, max_steps, step_cap=cap)
    diag_fix = 1.0 / np.sqrt(np.real(np.diagonal(r)))
    return hermitize(r * diag_fix[:, None] * diag_fix[None, :])
