"""Scene sampling, UPA steering vectors, and LoS channel construction.

Angle convention (one global frame for every array): elevation theta is
measured from the +z axis, azimuth phi in the x-y plane via atan2, and a
bearing is always taken from the AP toward the remote point (user or
target).  Half-wavelength element spacing is assumed throughout, which makes
the per-axis phase increment pi*cos(theta) vertically and
pi*sin(theta)*cos(phi) horizontally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .rng import SplitMix64


def steering_vertical(theta: float, m_v: int) -> np.ndarray:
    """Vertical factor: element m is exp(-j*m*pi*cos(theta)) / sqrt(m_v)."""
    if m_v < 1:
        raise ValueError("m_v must be >= 1")
    m = np.arange(m_v)
    return np.exp(-1j * m * np.pi * math.cos(theta)) / math.sqrt(m_v)


def steering_horizontal(phi: float, theta: float, m_h: int) -> np.ndarray:
    """Horizontal factor: element m is exp(-j*m*pi*sin(theta)*cos(phi)) / sqrt(m_h)."""
    if m_h < 1:
        raise ValueError("m_h must be >= 1")
    m = np.arange(m_h)
    return np.exp(-1j * m * np.pi * math.sin(theta) * math.cos(phi)) / math.sqrt(m_h)


def steering(phi: float, theta: float, m_v: int, m_h: int) -> np.ndarray:
    """Unit-norm UPA response b_h(phi, theta) kron b_v(theta), length m_v*m_h."""
    return np.kron(steering_horizontal(phi, theta, m_h), steering_vertical(theta, m_v))


def steering_grid(phi: np.ndarray, theta: np.ndarray, m_v: int, m_h: int) -> np.ndarray:
    """Steering vectors for paired angle arrays; returns (len(phi), m_v*m_h)."""
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if phi.shape != theta.shape:
        raise ValueError(f"phi/theta shapes differ: {phi.shape} vs {theta.shape}")
    mv = np.arange(m_v)
    mh = np.arange(m_h)
    b_v = np.exp(-1j * np.pi * np.cos(theta)[:, None] * mv) / math.sqrt(m_v)
    b_h = np.exp(-1j * np.pi * (np.sin(theta) * np.cos(phi))[:, None] * mh) / math.sqrt(m_h)
    return (b_h[:, :, None] * b_v[:, None, :]).reshape(phi.size, m_v * m_h)


def angles_between(p_from, p_to) -> tuple[float, float]:
    """(azimuth, elevation) bearing of `p_to` as seen from `p_from`."""
    d = np.asarray(p_to, dtype=np.float64) - np.asarray(p_from, dtype=np.float64)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ValueError("angles_between: coincident points")
    theta = math.acos(min(1.0, max(-1.0, d[2] / r)))
    phi = math.atan2(d[1], d[0])
    return phi, theta


@dataclass
class Scene:
    """One realization of user/target placement and complex channel gains.

    Regenerable bit-exactly from `sample_seed`; the draw order (users xyz in
    index order, then target xyz, then beta row-major over (AP, user)) is a
    persistence contract.
    """

    user_positions: np.ndarray   # (K, 3)
    target_position: np.ndarray  # (3,)
    beta: np.ndarray             # (n_tx, K) complex comm gains
    sample_seed: int

    def validate(self, config: SystemConfig) -> None:
        pos = np.vstack([self.user_positions, self.target_position[None, :]])
        lo = np.array([config.area_x[0], config.area_y[0], config.z_range[0]])
        hi = np.array([config.area_x[1], config.area_y[1], config.z_range[1]])
        if np.any(pos < lo) or np.any(pos > hi):
            raise ValueError("scene positions outside configured bounds")


def _draw_point(rng: SplitMix64, config: SystemConfig) -> list[float]:
    return [rng.uniform_in(*config.area_x),
            rng.uniform_in(*config.area_y),
            rng.uniform_in(*config.z_range)]


def _draw_beta(rng: SplitMix64, config: SystemConfig) -> np.ndarray:
    beta = np.empty((config.n_tx, config.k_users), dtype=np.complex128)
    for i in range(config.n_tx):
        for k in range(config.k_users):
            beta[i, k] = rng.complex_normal(float(config.zeta2[i, k]))
    return beta


def sample_scene(config: SystemConfig, sample_seed: int) -> Scene:
    """Draw user/target positions uniformly and comm gains as CN(0, zeta2)."""
    rng = SplitMix64(sample_seed)
    users = np.array([_draw_point(rng, config) for _ in range(config.k_users)])
    target = np.array(_draw_point(rng, config))
    return Scene(users, target, _draw_beta(rng, config), sample_seed)


def scene_from_positions(config: SystemConfig, users, target, sample_seed: int) -> Scene:
    """Scene with pinned positions; gains still drawn from `sample_seed`.

    Used by fixture scenes (e.g. beam-pattern layouts) where geometry is
    prescribed but channel gains must stay reproducible.
    """
    users = np.asarray(users, dtype=np.float64).reshape(config.k_users, 3)
    target = np.asarray(target, dtype=np.float64).reshape(3)
    rng = SplitMix64(sample_seed)
    scene = Scene(users, target, _draw_beta(rng, config), sample_seed)
    scene.validate(config)
    return scene


@dataclass
class ChannelSet:
    """Per-link comm vectors and unit-Frobenius sensing coupling matrices."""

    h: np.ndarray       # (n_tx, K, M) complex, h[i, k] between AP i and user k
    atilde: np.ndarray  # (n_tx, n_rx, M, M) complex, rank-1 outer products

    def stacked_h(self) -> np.ndarray:
        """(K, n_tx*M): user k's channel stacked over transmit APs."""
        n_tx, k_users, m = self.h.shape
        return self.h.transpose(1, 0, 2).reshape(k_users, n_tx * m)


def build_channels(config: SystemConfig, scene: Scene) -> ChannelSet:
    """LoS channels h = beta * a(bearing to user) and target couplings.

    atilde[i, j] = a(rx bearing at AP j) a(tx bearing at AP i)^H, where both
    bearings point from the respective AP toward the target.
    """
    m = config.m_per_ap
    h = np.empty((config.n_tx, config.k_users, m), dtype=np.complex128)
    for i in range(config.n_tx):
        for k in range(config.k_users):
            phi, theta = angles_between(config.tx_ap_positions[i], scene.user_positions[k])
            h[i, k] = scene.beta[i, k] * steering(phi, theta, config.m_v, config.m_h)

    a_tx = np.empty((config.n_tx, m), dtype=np.complex128)
    for i in range(config.n_tx):
        phi, theta = angles_between(config.tx_ap_positions[i], scene.target_position)
        a_tx[i] = steering(phi, theta, config.m_v, config.m_h)
    a_rx = np.empty((config.n_rx, m), dtype=np.complex128)
    for j in range(config.n_rx):
        phi, theta = angles_between(config.rx_ap_positions[j], scene.target_position)
        a_rx[j] = steering(phi, theta, config.m_v, config.m_h)

    atilde = np.empty((config.n_tx, config.n_rx, m, m), dtype=np.complex128)
    for i in range(config.n_tx):
        for j in range(config.n_rx):
            atilde[i, j] = np.outer(a_rx[j], a_tx[i].conj())
    return ChannelSet(h=h, atilde=atilde)


def target_steering_per_ap(config: SystemConfig, scene: Scene) -> np.ndarray:
    """(n_tx, M) transmit-side responses toward the target (matched beams)."""
    m = config.m_per_ap
    out = np.empty((config.n_tx, m), dtype=np.complex128)
    for i in range(config.n_tx):
        phi, theta = angles_between(config.tx_ap_positions[i], scene.target_position)
        out[i] = steering(phi, theta, config.m_v, config.m_h)
    return out
