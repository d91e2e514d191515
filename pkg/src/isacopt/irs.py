"""Surface-phase sub-problem: double-minorization solver and manifold baseline.

With the precoder fixed, the objective is quartic in the unit-modulus phase
vector.  One minorization flattens the quartic term to a quadratic through
the lifted variable X = Theta R Theta (valid because the lifted quadratic
form is PSD); a second one flattens the quadratic surrogate to a linear
form, whose maximizer on the torus is a closed-form phase alignment.

The second flattening is only a true minorizer if the quadratic surrogate
is convex in the real representation.  Its quartic-origin part has a
trace-zero indefinite Hessian, so the plain linearization can (and in
radar-weighted scenes does) decrease the objective.  The default solver
therefore composes the same building blocks through two value-preserving
repairs that restore the ascent guarantee:

* the quartic cross matrices are symmetrized (quadratic forms only see the
  symmetric part, so every surrogate value is unchanged), and
* a torus-constant anchor rho * theta^H theta is added and subtracted,
  with rho the smallest value making the loaded form convex; rho is zero
  whenever the surrogate is already convex, in which case the update
  coincides with the plain one.

``safeguard=False`` runs the plain composition and raises if it dips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MonotonicityError
from .objective import (IrsPhase, Precoder, comm_coefficient, hermitize,
                        quartic_coefficient, quartic_kernels, weighted_snr)
from .scene import ChannelSet, SceneConfig


@dataclass
class SurrogateWorkspace:
    """Per-iteration surrogate pieces, kept for inspection and tests."""

    x: np.ndarray        # Theta R Theta
    y: np.ndarray        # kernel of the frozen-side quartic cross term
    z: np.ndarray        # kernel of the mirrored cross term
    u1: np.ndarray       # quartic surrogate, conjugate-pair half
    u2: np.ndarray       # quartic surrogate, plain-pair half
    u3: np.ndarray       # quadratic (communication) form, Hermitian PSD
    u4: np.ndarray       # linear-term source matrix
    mu: np.ndarray       # diag(u4)
    nu: np.ndarray       # linear surrogate vector, conjugate slot
    eta: np.ndarray      # linear surrogate vector, plain slot


@dataclass
class InnerTrace:
    """Objective bookkeeping of one inner solve."""

    objectives: list[float] = field(default_factory=list)
    surrogate_gaps: list[float] = field(default_factory=list)
    line_search_failed: bool = False


def _kernel_factors(p: Precoder, ch: ChannelSet) -> tuple[np.ndarray, np.ndarray]:
    """V = (G P P^H G^H)^T and W = G* G^T, both Hermitian PSD."""
    gp = ch.g @ p.p
    v = hermitize((gp @ gp.conj().T).T)
    w = hermitize(ch.g.conj() @ ch.g.T)
    return v, w


def build_quartic_surrogate(theta_t: IrsPhase, p: Precoder, ch: ChannelSet,
                            cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic surrogate matrices (U1, U2) of the quartic term at theta_t.

    U1 = c (R^H o Y^T) and U2 = c (R o Z^T) with c = beta |alpha|^2 /
    sigma_R^2 and (Y, Z) the kernels at X_t = Theta_t R Theta_t.  The
    surrogate theta^H U1 theta* + theta^T U2 theta minorizes the quartic
    term after restoring the dropped constant c * vec(X_t)^H Q vec(X_t).
    """
    v, w = _kernel_factors(p, ch)
    th = theta_t.theta
    x_t = (th[:, None] * ch.r_mat) * th[None, :]
    y, z = quartic_kernels(x_t, v, w)
    c = quartic_coefficient(cfg)
    u1 = c * (ch.r_mat.conj() * y.T)
    u2 = c * (ch.r_mat * z.T)
    return u1, u2


def quartic_surrogate_constant(theta_t: IrsPhase, p: Precoder, ch: ChannelSet,
                               cfg: SceneConfig) -> float:
    """Dropped constant c * vec(X_t)^H Q vec(X_t); equals g4(theta_t)."""
    v, w = _kernel_factors(p, ch)
    th = theta_t.theta
    x_t = (th[:, None] * ch.r_mat) * th[None, :]
    y, _ = quartic_kernels(x_t, v, w)
    return quartic_coefficient(cfg) * float(np.real(np.vdot(x_t, y)))


def _quadratic_pieces(p: Precoder, ch: ChannelSet, cfg: SceneConfig
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cc = comm_coefficient(cfg)
    gp = ch.g @ p.p
    m = gp @ gp.conj().T
    u3 = hermitize(cc * ((ch.h.conj().T @ ch.h) * m.T))
    u4 = cc * (gp @ (ch.f @ p.p).conj().T @ ch.h)
    return u3, u4, np.diagonal(u4).copy()


def build_quadratic_terms(p: Precoder, ch: ChannelSet, cfg: SceneConfig
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic form U3 (Hermitian PSD by the Schur product theorem) and
    linear coefficient mu = diag(U4) of the communication terms."""
    u3, _, mu = _quadratic_pieces(p, ch, cfg)
    return u3, mu


def linear_surrogate_vectors(theta_t: IrsPhase, u1: np.ndarray, u2: np.ndarray,
                             u3: np.ndarray, mu: np.ndarray
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Linearization vectors of the quadratic surrogate at theta_t:

        nu  = 2 U1^T theta_t* + U3 theta_t + mu*
        eta = 2 U2^T theta_t  + U3^T theta_t* + mu
    """
    th = theta_t.theta
    nu = 2.0 * u1.T @ th.conj() + u3 @ th + mu.conj()
    eta = 2.0 * u2.T @ th + u3.T @ th.conj() + mu
    return nu, eta


def irs_phase_update(nu: np.ndarray, eta: np.ndarray,
                     theta_prev: np.ndarray | None = None) -> IrsPhase:
    """Torus maximizer of Re{theta^H nu + theta^T eta}: exp(j arg(nu + eta*)).

    Coordinates where nu + eta* vanishes have no preferred phase; they keep
    the previous phase when one is supplied (determinism), else 1.
    """
    s = nu + eta.conj()
    degenerate = np.abs(s) < 1e-14
    theta = np.exp(1j * np.angle(s))
    if np.any(degenerate):
        keep = theta_prev if theta_prev is not None else np.ones_like(s)
        theta = np.where(degenerate, keep, theta)
    return IrsPhase(theta)


def build_workspace(theta_t: IrsPhase, p: Precoder, ch: ChannelSet,
                    cfg: SceneConfig) -> SurrogateWorkspace:
    """Assemble every surrogate piece at theta_t (plain composition)."""
    v, w = _kernel_factors(p, ch)
    th = theta_t.theta
    x_t = (th[:, None] * ch.r_mat) * th[None, :]
    y, z = quartic_kernels(x_t, v, w)
    c = quartic_coefficient(cfg)
    u1 = c * (ch.r_mat.conj() * y.T)
    u2 = c * (ch.r_mat * z.T)
    u3, u4, mu = _quadratic_pieces(p, ch, cfg)
    nu, eta = linear_surrogate_vectors(theta_t, u1, u2, u3, mu)
    return SurrogateWorkspace(x=x_t, y=y, z=z, u1=u1, u2=u2, u3=u3, u4=u4,
                              mu=mu, nu=nu, eta=eta)


def ascent_anchor(u1_sym: np.ndarray, u3: np.ndarray) -> float:
    """Smallest rho >= 0 making the surrogate's real quadratic form convex.

    The displacement form is 2 Re{d^H U1s d*} + d^H U3 d; its real
    representation is assembled blockwise and rho = max(0, -lambda_min).
    """
    x1, y1 = u1_sym.real, u1_sym.imag
    e, o = u3.real, u3.imag
    top = np.hstack([2.0 * x1 + e, 2.0 * y1 - o])
    bottom = np.hstack([(2.0 * y1 - o).T, -2.0 * x1 + e])
    h = np.vstack([top, bottom])
    lam_min = float(np.linalg.eigvalsh(0.5 * (h + h.T))[0])
    return max(0.0, -lam_min) * (1.0 + 1e-9)


def _surrogate_value(theta: np.ndarray, u1, u2, u3, mu) -> float:
    """Quadratic surrogate value at theta."""
    quartic = np.real(theta.conj() @ u1 @ theta.conj() + theta @ u2 @ theta)
    quad = np.real(theta.conj() @ (u3 @ theta))
    lin = 2.0 * np.real(theta @ mu)
    return float(quartic + quad + lin)


def solve_irs_minorization(theta0: IrsPhase, p: Precoder, ch: ChannelSet,
                           cfg: SceneConfig, inner_tol: float = 1e-6,
                           inner_max: int = 200, safeguard: bool = True
                           ) -> tuple[IrsPhase, InnerTrace]:
    """Iterate the closed-form double-minorization update to convergence.

    Each iteration rebuilds the quartic surrogate at the current phases,
    linearizes, and applies the phase-alignment update; it stops when the
    relative objective gain drops below ``inner_tol`` or after
    ``inner_max`` iterations.  The recorded objective sequence is the true
    weighted SNR and must be nondecreasing (guaranteed with the default
    safeguard); a dip beyond 1e-9 relative slack raises.
    """
    if inner_max < 1:
        raise ConfigError(f"inner_max must be >= 1, got {inner_max}")
    u3, mu = build_quadratic_terms(p, ch, cfg)
    eye = np.eye(len(theta0))
    trace = InnerTrace()
    theta = theta0
    g_prev = weighted_snr(p, theta, ch, cfg)
    trace.objectives.append(g_prev)
    for _ in range(inner_max):
        u1, u2 = build_quartic_surrogate(theta, p, ch, cfg)
        if safeguard:
            u1 = 0.5 * (u1 + u1.T)
            u2 = 0.5 * (u2 + u2.T)
            rho = ascent_anchor(u1, u3)
            u3_eff = u3 + rho * eye if rho > 0.0 else u3
        else:
            u3_eff = u3
        nu, eta = linear_surrogate_vectors(theta, u1, u2, u3_eff, mu)
        new_theta = irs_phase_update(nu, eta, theta.theta)

        g_new = weighted_snr(p, new_theta, ch, cfg)
        # gap of the fully restored surrogate chain at the new point
        constant = _surrogate_value(theta.theta, u1, u2, u3_eff, mu) \
            - float(np.real(theta.theta.conj() @ nu + theta.theta @ eta))
        lifted = float(np.real(new_theta.theta.conj() @ nu
                               + new_theta.theta @ eta)) + constant
        quad_at_new = _surrogate_value(new_theta.theta, u1, u2, u3_eff, mu)
        trace.surrogate_gaps.append(quad_at_new - lifted)

        if g_new < g_prev - 1e-9 * abs(g_prev):
            raise MonotonicityError(
                f"objective decreased from {g_prev:.12g} to {g_new:.12g} "
                f"in the inner phase update"
                + ("" if safeguard else " (safeguard disabled)"))
        trace.objectives.append(g_new)
        done = abs(g_new - g_prev) <= inner_tol * max(abs(g_prev), 1e-300)
        theta, g_prev = new_theta, g_new
        if done:
            break
    return theta, trace


def wirtinger_gradient(theta: IrsPhase, p: Precoder, ch: ChannelSet,
                       cfg: SceneConfig) -> np.ndarray:
    """Conjugate-coordinate gradient of the true objective at theta.

    For real objective g, dg = 2 Re{grad^H d theta}.  The communication
    terms contribute mu* + U3 theta; the quartic term is the product of the
    two PSD forms q_v q_w in b = theta o a, so the product rule gives
    a* o (c (q_w V b + q_v W b)).
    """
    u3, mu = build_quadratic_terms(p, ch, cfg)
    v, w = _kernel_factors(p, ch)
    b = theta.theta * ch.steer
    vb = v @ b
    wb = w @ b
    q_v = float(np.real(np.vdot(b, vb)))
    q_w = float(np.real(np.vdot(b, wb)))
    c = quartic_coefficient(cfg)
    grad_quartic = ch.steer.conj() * (c * (q_w * vb + q_v * wb))
    return mu.conj() + u3 @ theta.theta + grad_quartic


def _tangent_project(grad: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Project onto the tangent space of the product-of-circles manifold."""
    return grad - np.real(grad * theta.conj()) * theta


def _retract(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Elementwise renormalization onto the torus."""
    mag = np.abs(v)
    safe = mag > 1e-300
    out = np.where(safe, v / np.where(safe, mag, 1.0), fallback)
    return out


def solve_irs_manifold(theta0: IrsPhase, p: Precoder, ch: ChannelSet,
                       cfg: SceneConfig, inner_tol: float = 1e-6,
                       inner_max: int = 200, armijo_slope: float = 1e-4,
                       max_halvings: int = 50) -> tuple[IrsPhase, InnerTrace]:
    """Riemannian gradient ascent on the torus with Armijo backtracking.

    Baseline solver: tangent projection of the conjugate gradient,
    elementwise-renormalization retraction, initial step 1/||grad||,
    contraction 0.5.  Accepted steps only, so the trace is monotone.
    """
    if inner_max < 1:
        raise ConfigError(f"inner_max must be >= 1, got {inner_max}")
    trace = InnerTrace()
    theta = theta0.theta.copy()
    g = weighted_snr(p, IrsPhase(theta), ch, cfg)
    trace.objectives.append(g)
    for _ in range(inner_max):
        grad = wirtinger_gradient(IrsPhase(theta), p, ch, cfg)
        rgrad = _tangent_project(grad, theta)
        norm2 = float(np.real(np.vdot(rgrad, rgrad)))
        if norm2 <= 1e-300:
            break
        step = 1.0 / math.sqrt(norm2)
        accepted = False
        for _ in range(max_halvings):
            cand = _retract(theta + step * rgrad, theta)
            g_cand = weighted_snr(p, IrsPhase(cand), ch, cfg)
            if g_cand >= g + armijo_slope * step * norm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            trace.line_search_failed = True
            break
        gain = g_cand - g
        theta, g = cand, g_cand
        trace.objectives.append(g)
        if gain <= inner_tol * max(abs(g), 1e-300):
            break
    return IrsPhase(theta), trace
