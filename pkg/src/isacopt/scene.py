"""Scene parameters, steering vectors, Rician channel synthesis and unit helpers.

The radar transceiver is a uniform linear array (same element count on
transmit and receive), the reflecting surface a uniform planar array of
``irs_rows x irs_cols`` passive elements, and the downlink serves ``n_users``
single-antenna receivers.  Geometry is statistical: channels are drawn from a
Rician model with configurable K-factors, and large-scale losses are absorbed
into the round-trip coefficient and the noise powers.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi


def db_to_linear(x_db: float) -> float:
    """Convert a dB ratio to linear scale, 10**(x/10)."""
    return float(10.0 ** (x_db / 10.0))


def linear_to_db(x: float) -> float:
    """Convert a positive linear ratio to dB. Rejects non-positive input."""
    if x <= 0:
        raise ConfigError(f"linear_to_db requires a positive value, got {x}")
    return float(10.0 * math.log10(x))


def dbm_to_watts(x_dbm: float) -> float:
    """Convert dBm to watts, 10**((x - 30)/10)."""
    return float(10.0 ** ((x_dbm - 30.0) / 10.0))


@dataclass
class SceneConfig:
    """Physical and weighting parameters of one scene.

    Powers are linear watts, angles radians, Rician factors linear ratios.
    ``alpha`` is the complex round-trip reflection coefficient of the
    radar -> surface -> target -> surface -> radar path; only its magnitude
    matters to the objective, so configs normally set the magnitude and let
    the experiment harness draw a uniform phase per realization.
    """

    n_tx: int = 16
    n_rx: int = 16
    n_users: int = 5
    irs_rows: int = 6          # L_y
    irs_cols: int = 6          # L_x
    spacing_over_lambda: float = 0.5
    beta: float = 0.5          # radar weight in the scalarized objective
    sigma2_radar: float = 1e-3
    sigma2_comm: float = 1e-3
    alpha: complex = 0.01 + 0.0j
    power_budget: float = 1.0
    beampattern_tol: float = 10.0
    rician_g: float = 1.0
    rician_h: float = 0.1
    rician_f: float = 0.1
    target_azimuth: float = math.pi / 4
    target_elevation: float = math.pi / 3
    # Transmit-side departure angle toward the surface; also steers the
    # directive component of the default desired beampattern.
    radar_irs_azimuth: float = 0.0
    # Directive-vs-omni mix of the default desired covariance, in [0, 1].
    beampattern_mix: float = 0.5

    def __post_init__(self):
        if self.n_rx != self.n_tx:
            raise ConfigError(
                f"receive antenna count must equal transmit count "
                f"(n_rx={self.n_rx}, n_tx={self.n_tx}): the round-trip "
                f"return channel is the transpose of the forward one"
            )
        if min(self.n_tx, self.n_users, self.irs_rows, self.irs_cols) < 1:
            raise ConfigError("antenna, user and surface-element counts must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 <= self.beampattern_mix <= 1.0:
            raise ConfigError(f"beampattern_mix must lie in [0, 1], got {self.beampattern_mix}")
        for name in ("sigma2_radar", "sigma2_comm", "power_budget",
                     "beampattern_tol", "spacing_over_lambda"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        for name in ("rician_g", "rician_h", "rician_f"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        self.alpha = complex(self.alpha)

    @property
    def n_irs(self) -> int:
        """Total surface element count L."""
        return self.irs_rows * self.irs_cols


@dataclass
class ChannelSet:
    """One realization of all channels plus the target steering data.

    ``r_mat`` is the rank-one outer product (without conjugation) of the
    surface steering vector toward the target with itself.
    """

    g: np.ndarray        # L x N_T, radar -> surface
    h: np.ndarray        # K x L, surface -> users
    f: np.ndarray        # K x N_T, radar -> users direct
    steer: np.ndarray    # length L
    r_mat: np.ndarray    # L x L

    def __post_init__(self):
        if not np.allclose(np.abs(self.steer), 1.0, atol=1e-12):
            raise ConfigError("steering vector entries must have unit modulus")


def ula_spacing_check(config: SceneConfig) -> bool:
    """True iff the array spacing is the conventional half wavelength."""
    return abs(config.spacing_over_lambda - 0.5) <= 1e-12


def upa_steering(psi_a: float, psi_e: float, l_x: int, l_y: int,
                 d_over_lambda: float) -> np.ndarray:
    """Planar-array steering vector toward azimuth psi_a, elevation psi_e.

    Row (y) factor uses direction cosine cos(psi_a)sin(psi_e), column (x)
    factor sin(psi_a)sin(psi_e); the result is their Kronecker product
    (y-major), so entry p*l_x + q equals a_y[p] * a_x[q].  Entries are
    constructed as pure phases and the first entry is exactly 1.
    """
    if l_x < 1 or l_y < 1:
        raise ConfigError(f"array dimensions must be >= 1, got l_x={l_x}, l_y={l_y}")
    inc_y = TWO_PI * d_over_lambda * math.cos(psi_a) * math.sin(psi_e)
    inc_x = TWO_PI * d_over_lambda * math.sin(psi_a) * math.sin(psi_e)
    a_y = np.exp(1j * inc_y * np.arange(l_y))
    a_x = np.exp(1j * inc_x * np.arange(l_x))
    return np.kron(a_y, a_x)


def ula_steering(angle: float, n: int, d_over_lambda: float) -> np.ndarray:
    """Linear-array steering vector, phase increment 2*pi*(d/lambda)*sin(angle)."""
    if n < 1:
        raise ConfigError(f"array dimension must be >= 1, got {n}")
    return np.exp(1j * TWO_PI * d_over_lambda * math.sin(angle) * np.arange(n))


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Standard circular complex Gaussian entries, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rician_channel(rows: int, cols: int, k_factor: float, los: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Rician draw sqrt(k/(1+k))*los + sqrt(1/(1+k))*N with N ~ CN(0, I).

    ``los`` must be a unit-modulus (typically rank-one) matrix so that the
    expected squared Frobenius norm of the output is rows*cols.
    """
    if k_factor < 0:
        raise ConfigError(f"Rician K-factor must be non-negative, got {k_factor}")
    if los.shape != (rows, cols):
        raise ConfigError(f"LOS shape {los.shape} does not match ({rows}, {cols})")
    w_los = math.sqrt(k_factor / (1.0 + k_factor))
    w_nlos = math.sqrt(1.0 / (1.0 + k_factor))
    return w_los * los + w_nlos * complex_normal(rng, rows, cols)


def random_phase_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(1j * TWO_PI * rng.random(n))


def make_channels(cfg: SceneConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one channel realization for the scene.

    The radar->surface link gets a steering-based line-of-sight component
    (random arrival angles on the surface side, the configured departure
    angle on the radar side); the surface->user and direct links get
    random-phase rank-one LOS components since their scattered part
    dominates anyway.
    """
    lx, ly, d = cfg.irs_cols, cfg.irs_rows, cfg.spacing_over_lambda
    steer = upa_steering(cfg.target_azimuth, cfg.target_elevation, lx, ly, d)
    # mirror the upper triangle so the outer product is bitwise symmetric
    r_mat = np.outer(steer, steer)
    r_mat = np.triu(r_mat) + np.triu(r_mat, 1).T

    az = rng.uniform(0.0, TWO_PI)
    el = rng.uniform(0.0, np.pi)
    los_g = np.outer(upa_steering(az, el, lx, ly, d),
                     ula_steering(cfg.radar_irs_azimuth, cfg.n_tx, d))
    g = rician_channel(cfg.n_irs, cfg.n_tx, cfg.rician_g, los_g, rng)

    los_h = np.outer(random_phase_vector(rng, cfg.n_users),
                     random_phase_vector(rng, cfg.n_irs))
    h = rician_channel(cfg.n_users, cfg.n_irs, cfg.rician_h, los_h, rng)

    los_f = np.outer(random_phase_vector(rng, cfg.n_users),
                     random_phase_vector(rng, cfg.n_tx))
    f = rician_channel(cfg.n_users, cfg.n_tx, cfg.rician_f, los_f, rng)

    return ChannelSet(g=g, h=h, f=f, steer=steer, r_mat=r_mat)


# --- JSON configuration loading -------------------------------------------
#
# dB-valued keys carry a "_db" suffix (plain ratio) or "_dbm" suffix (power
# referenced to 1 mW) and are converted on load.  The round-trip coefficient
# is configured through its magnitude as "alpha_mag" or "alpha_mag_db".

_ALPHA_KEYS = {"alpha_mag": lambda v: complex(float(v)),
               "alpha_mag_db": lambda v: complex(db_to_linear(float(v)))}


def _convert_suffixed(raw: dict, valid_names: set[str], where: str) -> dict:
    out: dict = {}

    def put(name, value, src):
        if name in out:
            raise ConfigError(f"{where}: '{src}' duplicates an already-set field '{name}'")
        out[name] = value

    for key, value in raw.items():
        if key in _ALPHA_KEYS and "alpha" in valid_names:
            put("alpha", _ALPHA_KEYS[key](value), key)
        elif key.endswith("_dbm") and key[:-4] in valid_names:
            put(key[:-4], dbm_to_watts(float(value)), key)
        elif key.endswith("_db") and key[:-3] in valid_names:
            put(key[:-3], db_to_linear(float(value)), key)
        elif key in valid_names:
            put(key, value, key)
        else:
            raise ConfigError(f"{where}: unknown key '{key}'")
    return out


def scene_config_from_dict(raw: dict) -> SceneConfig:
    """Build a SceneConfig from a JSON-style dict, converting dB fields."""
    names = {f.name for f in fields(SceneConfig)}
    return SceneConfig(**_convert_suffixed(raw, names, "scene config"))


def load_scene_config(path: str | Path) -> SceneConfig:
    """Read a scene configuration from a JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    cfg = scene_config_from_dict(raw)
    if not ula_spacing_check(cfg):
        warnings.warn(
            f"array spacing d/lambda = {cfg.spacing_over_lambda} differs from "
            f"the conventional 0.5", stacklevel=2)
    return cfg
