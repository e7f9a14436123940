"""Null-space-projection + regularized-zero-forcing reference beamformer.

Construction: communication columns take the directions of
H (H^H H + alpha I)^(-1) with alpha = K * mean(sigma2) / P_total, the sensing
column is the target steering projected onto the null space of the user
channels, and a bisection finds the smallest sensing power fraction kappa
meeting the sensing-SNR floor.  Power accounting is per AP: the sensing
column gets kappa * p_max at every AP and each user column
(1 - kappa) * p_max / K (each AP block rescaled to its exact share), so every
AP transmits at exactly p_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .geometry import ChannelSet
from .metrics import BeamformerSet, per_ap_power, power_projection, sensing_snr

_ZERO_NORM = 1e-9


@dataclass
class NsRzfResult:
    beams: BeamformerSet
    feasible: bool
    kappa: float
    nullspace_dim: int
    achieved_snr: float
    rank_deficient: bool = False


def rzf_directions(h_cols: np.ndarray, sigma2: np.ndarray, p_total: float,
                   alpha_scale: float = 1.0) -> tuple[np.ndarray, bool]:
    """Unit-norm stacked RZF directions; columns of H (H^H H + alpha I)^(-1).

    `h_cols` holds the users' stacked channels as columns, shape (NM, K).
    Returns (directions, rank_deficient); a rank-deficient H falls back to a
    pseudo-inverse of the regularized Gram matrix.
    """
    nm, k = h_cols.shape
    alpha = alpha_scale * k * float(np.mean(sigma2)) / p_total
    gram = h_cols.conj().T @ h_cols + alpha * np.eye(k)
    rank_deficient = np.linalg.matrix_rank(h_cols) < k
    if rank_deficient:
        w = h_cols @ np.linalg.pinv(gram)
    else:
        w = np.linalg.solve(gram.T, h_cols.T).T
    norms = np.linalg.norm(w, axis=0)
    safe = np.where(norms > _ZERO_NORM, norms, 1.0)
    return w / safe, rank_deficient


def nullspace_sensing_direction(h_cols: np.ndarray,
                                abar: np.ndarray) -> tuple[np.ndarray, bool, int]:
    """Project the stacked target steering onto null(H^H) and normalize.

    Returns (direction, nonzero, nullspace_dim); the direction is the zero
    vector with nonzero=False when the steering lies in the span of the user
    channels (or the null space is empty).
    """
    nm = abar.shape[0]
    if h_cols.size == 0:
        norm = np.linalg.norm(abar)
        return abar / norm, True, nm
    u, s, _ = np.linalg.svd(h_cols, full_matrices=False)
    tol = max(h_cols.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    basis = u[:, s > tol]
    rank = basis.shape[1]
    projected = abar - basis @ (basis.conj().T @ abar)
    norm = np.linalg.norm(projected)
    if norm < _ZERO_NORM or rank >= nm:
        return np.zeros_like(abar), False, nm - rank
    return projected / norm, True, nm - rank


def _normalized_blocks(v: np.ndarray, n_tx: int, m: int) -> np.ndarray:
    """(n_tx, M) per-AP unit blocks of a stacked vector; zero blocks stay zero."""
    blocks = v.reshape(n_tx, m)
    norms = np.linalg.norm(blocks, axis=1)
    safe = np.where(norms > _ZERO_NORM, norms, 1.0)
    return np.where(norms[:, None] > _ZERO_NORM, blocks / safe[:, None], 0.0)


def _recover_target_steering(channels: ChannelSet) -> np.ndarray:
    """(n_tx, M) transmit steering toward the target, up to a per-AP phase.

    atilde[i, j] = a_rx a_tx^H, so the conjugate of its largest row is
    parallel to a_tx; the per-AP phase ambiguity is metric-irrelevant.
    """
    n_tx = channels.atilde.shape[0]
    out = np.empty((n_tx, channels.atilde.shape[2]), dtype=np.complex128)
    for i in range(n_tx):
        mat = channels.atilde[i, 0]
        row = mat[np.argmax(np.linalg.norm(mat, axis=1))]
        out[i] = row.conj() / np.linalg.norm(row)
    return out


def build_at_kappa(kappa: float, f0_blocks: np.ndarray, w_blocks: np.ndarray,
                   p_max: float, split: str = "equal") -> np.ndarray:
    """Assemble (n_tx, M, K+1) beams for a sensing power fraction kappa.

    `f0_blocks` is (n_tx, M) unit-or-zero; `w_blocks` is (K, n_tx, M) per-AP
    unit blocks for split="equal", or (K, n_tx, M) raw stacked-direction
    blocks for split="global" (followed by a power projection).
    """
    n_tx, m = f0_blocks.shape
    k = w_blocks.shape[0]
    f = np.zeros((n_tx, m, k + 1), dtype=np.complex128)
    f[:, :, 0] = np.sqrt(kappa * p_max) * f0_blocks
    if k:
        per_col = (1.0 - kappa) * p_max / k
        if split == "equal":
            f[:, :, 1:] = np.sqrt(per_col) * w_blocks.transpose(1, 2, 0)
        elif split == "global":
            col_power = per_col * n_tx
            stacked_norm = np.linalg.norm(w_blocks.reshape(k, -1), axis=1)
            scale = np.sqrt(col_power) / np.where(stacked_norm > _ZERO_NORM, stacked_norm, 1.0)
            f[:, :, 1:] = (w_blocks * scale[:, None, None]).transpose(1, 2, 0)
        else:
            raise ValueError(f"unknown split '{split}'")
    if split == "global":
        f = power_projection(f, p_max)
    return f


def ns_rzf_beamformer(config: SystemConfig, channels: ChannelSet,
                      target_steering: np.ndarray | None = None,
                      gamma_min: float | None = None,
                      p_max: float | None = None,
                      alpha_scale: float = 1.0,
                      split: str = "equal",
                      kappa_tol: float = 1e-6) -> NsRzfResult:
    """Full baseline: RZF directions, null-space sensing beam, kappa bisection.

    Picks the smallest kappa with sensing SNR >= gamma_min; if even kappa=1
    misses the target the result is flagged infeasible with kappa=1 (or
    kappa=0 when no sensing direction exists at all, since sensing power
    would then be pure waste).
    """
    gamma_min = config.gamma_min if gamma_min is None else gamma_min
    p_max = config.p_max if p_max is None else p_max
    n_tx, m = config.n_tx, config.m_per_ap
    h_cols = channels.stacked_h().T

    w, rank_deficient = rzf_directions(h_cols, config.sigma2,
                                       n_tx * p_max, alpha_scale)
    if target_steering is None:
        target_steering = _recover_target_steering(channels)
    abar = np.asarray(target_steering).reshape(n_tx * m)
    f0, f0_nonzero, null_dim = nullspace_sensing_direction(h_cols, abar)

    f0_blocks = _normalized_blocks(f0, n_tx, m)
    if split == "equal":
        w_blocks = np.stack([_normalized_blocks(w[:, k], n_tx, m)
                             for k in range(config.k_users)])
    else:
        w_blocks = np.stack([w[:, k].reshape(n_tx, m)
                             for k in range(config.k_users)])

    def snr_at(kappa: float) -> float:
        f = build_at_kappa(kappa, f0_blocks, w_blocks, p_max, split)
        return sensing_snr(channels.atilde, f, config.chi2, config.xi2)

    if snr_at(0.0) >= gamma_min:
        kappa, feasible = 0.0, True
    elif not f0_nonzero:
        kappa, feasible = 0.0, False
    elif snr_at(1.0) < gamma_min:
        kappa, feasible = 1.0, False
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > kappa_tol:
            mid = 0.5 * (lo + hi)
            if snr_at(mid) >= gamma_min:
                hi = mid
            else:
                lo = mid
        kappa, feasible = hi, True

    f = build_at_kappa(kappa, f0_blocks, w_blocks, p_max, split)
    return NsRzfResult(beams=BeamformerSet(f), feasible=feasible, kappa=kappa,
                       nullspace_dim=null_dim,
                       achieved_snr=sensing_snr(channels.atilde, f, config.chi2, config.xi2),
                       rank_deficient=rank_deficient)
