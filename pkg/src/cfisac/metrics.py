"""Closed-form performance metrics on complex arrays, plus a Monte-Carlo
sensing-SNR estimator used as an independent check of the closed form.

Conventions: beamformer column 0 carries the sensing stream, columns 1..K
the user streams.  The sensing SNR denominator is the plain sum of per-AP
noise variances (no per-antenna factor), matching the closed form used for
training and evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .geometry import ChannelSet, steering_grid


@dataclass
class BeamformerSet:
    """Per-AP complex beamforming matrices, shape (n_tx, M, K+1)."""

    f: np.ndarray

    @property
    def n_tx(self) -> int:
        return self.f.shape[0]

    def stacked(self) -> np.ndarray:
        """(n_tx*M, K+1): all APs' rows stacked in AP order."""
        n_tx, m, s = self.f.shape
        return self.f.reshape(n_tx * m, s)

    @classmethod
    def from_stacked(cls, f_stacked: np.ndarray, n_tx: int) -> "BeamformerSet":
        nm, s = f_stacked.shape
        return cls(f_stacked.reshape(n_tx, nm // n_tx, s))


@dataclass
class MetricsReport:
    sinr: np.ndarray          # (K,) linear
    sum_rate: float           # bits/s/Hz
    sensing_snr: float        # linear
    per_ap_power: np.ndarray  # (n_tx,)
    sensing_feasible: bool
    power_feasible: bool


def sinr_per_user(h_stacked: np.ndarray, f_stacked: np.ndarray,
                  sigma2: np.ndarray) -> np.ndarray:
    """Linear SINR per user from stacked channels (K, NM) and beams (NM, K+1).

    User k's desired column is k+1; everything else it hears (other users'
    columns and the sensing column 0) is interference.
    """
    k_users, nm = h_stacked.shape
    if f_stacked.shape != (nm, k_users + 1):
        raise ValueError(f"sinr_per_user: expected beams ({nm}, {k_users + 1}), "
                         f"got {f_stacked.shape}")
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if sigma2.shape != (k_users,):
        raise ValueError(f"sinr_per_user: sigma2 must have shape ({k_users},)")
    # rx[k, s] = |h_k^H f_s|^2 for every stream s
    rx = np.abs(h_stacked.conj() @ f_stacked) ** 2
    desired = rx[np.arange(k_users), np.arange(1, k_users + 1)]
    interference = rx.sum(axis=1) - desired
    return desired / (interference + sigma2)


def sum_rate(sinrs: np.ndarray) -> float:
    sinrs = np.asarray(sinrs, dtype=np.float64)
    if np.any(sinrs < 0.0):
        raise ValueError("sum_rate: SINRs must be nonnegative")
    return float(np.log2(1.0 + sinrs).sum())


def sensing_snr(atilde: np.ndarray, f: np.ndarray, chi2: np.ndarray,
                xi2: np.ndarray) -> float:
    """sum_{j,i} chi2[i,j] * ||atilde[i,j] @ F_i||_F^2 / sum_j xi2[j]."""
    n_tx, n_rx = chi2.shape
    if atilde.shape[:2] != (n_tx, n_rx) or f.shape[0] != n_tx:
        raise ValueError(f"sensing_snr: inconsistent shapes atilde {atilde.shape}, "
                         f"f {f.shape}, chi2 {chi2.shape}")
    num = 0.0
    for i in range(n_tx):
        for j in range(n_rx):
            num += chi2[i, j] * np.sum(np.abs(atilde[i, j] @ f[i]) ** 2)
    return float(num / np.sum(xi2))


def per_ap_power(f: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of each AP's beamforming matrix."""
    return np.sum(np.abs(f) ** 2, axis=(1, 2))


def power_projection(f: np.ndarray, p_max: float) -> np.ndarray:
    """Euclidean projection onto the per-AP power ball: shrink, never grow.

    The trigger carries a 1e-12 relative guard so re-projecting an already
    projected set is a bit-exact no-op despite rounding in the power sums.
    """
    if p_max <= 0.0:
        raise ValueError("p_max must be positive")
    powers = per_ap_power(f)
    hot = powers > p_max * (1.0 + 1e-12)
    scale = np.where(hot, np.sqrt(p_max / np.maximum(powers, p_max)), 1.0)
    return f * scale[:, None, None]


def metrics_report(config: SystemConfig, channels: ChannelSet,
                   beams: BeamformerSet) -> MetricsReport:
    sinr = sinr_per_user(channels.stacked_h(), beams.stacked(), config.sigma2)
    rate = sum_rate(sinr)
    snr = sensing_snr(channels.atilde, beams.f, config.chi2, config.xi2)
    powers = per_ap_power(beams.f)
    return MetricsReport(
        sinr=sinr,
        sum_rate=rate,
        sensing_snr=snr,
        per_ap_power=powers,
        sensing_feasible=bool(snr >= config.gamma_min * (1.0 - 1e-9)),
        power_feasible=bool(np.all(powers <= config.p_max * (1.0 + 1e-9))),
    )


def mc_sensing_snr(atilde: np.ndarray, f: np.ndarray, chi2: np.ndarray,
                   xi2: np.ndarray, n_trials: int, seed: int) -> float:
    """Monte-Carlo estimate of the sensing SNR.

    Per trial: draw unit-power independent streams s ~ CN(0, I_{K+1}) and
    gains lambda[i,j] ~ CN(0, chi2[i,j]), form each receive AP's echo
    sum_i lambda[i,j] atilde[i,j] F_i s, and average the total echo energy;
    the denominator is the same sum of noise variances as the closed form.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    n_tx, n_rx = chi2.shape
    n_streams = f.shape[2]
    rng = np.random.default_rng(seed)
    # b[i, j] = atilde[i, j] @ F_i, precomputed once
    b = np.einsum("ijmn,ins->ijms", atilde, f)

    total = 0.0
    chunk = 20_000
    done = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        s = (rng.standard_normal((n, n_streams)) +
             1j * rng.standard_normal((n, n_streams))) / np.sqrt(2.0)
        lam = (rng.standard_normal((n, n_tx, n_rx)) +
               1j * rng.standard_normal((n, n_tx, n_rx))) * np.sqrt(chi2 / 2.0)
        # echo[t, j, m] = sum_i lam[t, i, j] * (b[i, j] @ s[t])
        bs = np.einsum("ijms,ts->tijm", b, s)
        echo = np.einsum("tij,tijm->tjm", lam, bs)
        total += float(np.sum(np.abs(echo) ** 2))
        done += n
    return total / n_trials / float(np.sum(xi2))


def beam_pattern(f_i: np.ndarray, phi: np.ndarray, theta: np.ndarray,
                 m_v: int, m_h: int) -> np.ndarray:
    """Array gains per grid point: column 0 totals, then one per stream.

    gain_s(phi, theta) = |a(phi, theta)^H f_s|^2; returns (n_points, 1 + K+1).
    """
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if phi.size == 0:
        raise ValueError("beam_pattern: empty grid")
    a = steering_grid(phi, theta, m_v, m_h)
    per_stream = np.abs(a.conj() @ f_i) ** 2
    return np.column_stack([per_stream.sum(axis=1), per_stream])


def write_beam_pattern_csv(path, phi: np.ndarray, theta: np.ndarray,
                           gains: np.ndarray, header_comments: list[str] | None = None) -> str:
    """Render the beam-pattern CSV (angles in radians, 6 decimal places)."""
    n_streams = gains.shape[1] - 1
    cols = ["phi", "theta", "gain_total", "gain_s0"]
    cols += [f"gain_u{k}" for k in range(1, n_streams)]
    lines = list(header_comments or [])
    lines.append(",".join(cols))
    for p, t, row in zip(phi.reshape(-1), theta.reshape(-1), gains):
        lines.append(",".join(f"{v:.6f}" for v in (p, t, *row)))
    text = "\n".join(lines) + "\n"
    if path is not None:
        from .dataset import _atomic_write
        from pathlib import Path
        _atomic_write(Path(path), text)
    return text
