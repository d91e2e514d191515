import numpy as np
import pytest

from isacopt import IrsPhase, Precoder, SceneConfig, make_channels
from isacopt.scene import complex_normal


def small_config(l_rows=2, l_cols=2, n_tx=3, k=2, beta=0.5, **kwargs):
    defaults = dict(n_tx=n_tx, n_rx=n_tx, n_users=k, irs_rows=l_rows,
                    irs_cols=l_cols, beta=beta, alpha=0.1 + 0.0j)
    defaults.update(kwargs)
    return SceneConfig(**defaults)


def random_scene(rng, l_rows=2, l_cols=2, n_tx=3, k=2, **kwargs):
    """Seeded scene + channels + power-normalized random precoder + phases."""
    kwargs.setdefault("beta", float(rng.uniform(0.05, 0.95)))
    cfg = small_config(l_rows, l_cols, n_tx, k, **kwargs)
    ch = make_channels(cfg, rng)
    p = complex_normal(rng, cfg.n_tx, cfg.n_users)
    p = p * np.sqrt(cfg.power_budget / np.sum(np.abs(p) ** 2))
    theta = IrsPhase(np.exp(2j * np.pi * rng.random(cfg.n_irs)))
    return cfg, ch, Precoder(p), theta


def random_phases(rng, l):
    return IrsPhase(np.exp(2j * np.pi * rng.random(l)))


def random_hermitian(rng, n, scale=1.0):
    m = complex_normal(rng, n, n)
    return scale * 0.5 * (m + m.conj().T)


def random_psd(rng, n, scale=1.0):
    m = complex_normal(rng, n, n)
    return scale * (m @ m.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
