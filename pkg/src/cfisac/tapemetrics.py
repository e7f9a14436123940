"""Differentiable (tape-recorded) versions of the performance metrics.

Complex quantities are carried as (re, im) tensor pairs; a complex inner
product h^H f expands into four real matrix products.  Shapes are batched:
channels (B, K, NM), couplings (B, M, M) per AP pair, beams (B, n_tx, M, S)
with S = K + 1 streams, sensing stream in column 0.

These mirror the plain complex implementations in `metrics`; the two are
cross-checked against each other in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

_LOG2 = math.log(2.0)


def cmatmul(a_re, a_im, b_re, b_im) -> tuple[Tensor, Tensor]:
    """(a_re + j a_im) @ (b_re + j b_im) as real tensor pairs."""
    re = ad.matmul(a_re, b_re) - ad.matmul(a_im, b_im)
    im = ad.matmul(a_re, b_im) + ad.matmul(a_im, b_re)
    return re, im


def abs2(re, im) -> Tensor:
    return ad.square(re) + ad.square(im)


def power_projection_tape(f_re: Tensor, f_im: Tensor, p_max: float) -> tuple[Tensor, Tensor]:
    """Per-AP shrink onto the power budget; identity where already feasible.

    Beams are (B, n_tx, M, S).  The scale is sqrt(p_max / max(power, p_max)),
    which keeps the gradient finite even for all-zero beams.
    """
    powers = abs2(f_re, f_im).sum(axis=(2, 3))                    # (B, n_tx)
    capped = ad.relu(powers - p_max) + p_max                      # max(power, p_max)
    scale = ad.sqrt(p_max / capped)
    b, n_tx = scale.shape
    scale4 = scale.reshape((b, n_tx, 1, 1))
    return f_re * scale4, f_im * scale4


def sinr_tape(h_re, h_im, f_re: Tensor, f_im: Tensor, sigma2: np.ndarray) -> Tensor:
    """(B, K) linear SINRs; h is (B, K, NM) constant, f is stacked (B, NM, S)."""
    # h^H f: conjugation flips the sign of h_im
    rx_re = ad.matmul(h_re, f_re) + ad.matmul(h_im, f_im)
    rx_im = ad.matmul(h_re, f_im) - ad.matmul(h_im, f_re)
    rx = abs2(rx_re, rx_im)                                       # (B, K, S)
    k_users = rx.shape[1]
    mask = np.zeros((k_users, k_users + 1))
    mask[np.arange(k_users), np.arange(1, k_users + 1)] = 1.0
    desired = (rx * mask).sum(axis=2)                             # (B, K)
    interference = rx.sum(axis=2) - desired
    return desired / (interference + np.asarray(sigma2, dtype=np.float64))


def sum_rate_tape(sinr: Tensor) -> Tensor:
    """(B,) achievable sum-rate in bits/s/Hz."""
    return ad.log(sinr + 1.0).sum(axis=1) * (1.0 / _LOG2)


def sensing_snr_tape(a_re: np.ndarray, a_im: np.ndarray, f_re: Tensor, f_im: Tensor,
                     chi2: np.ndarray, xi2: np.ndarray) -> Tensor:
    """(B,) sensing SNR; couplings a_* are (B, n_tx, n_rx, M, M) constants."""
    n_tx, n_rx = chi2.shape
    total = None
    for i in range(n_tx):
        fi_re = f_re[:, i]
        fi_im = f_im[:, i]
        for j in range(n_rx):
            re, im = cmatmul(a_re[:, i, j], a_im[:, i, j], fi_re, fi_im)
            term = abs2(re, im).sum(axis=(1, 2)) * float(chi2[i, j])
            total = term if total is None else total + term
    return total * (1.0 / float(np.sum(xi2)))


def penalty_loss_tape(rate: Tensor, snr: Tensor, gamma_min: float, rho: float) -> Tensor:
    """(B,) per-sample losses: -rate + rho * relu(gamma_min - snr)."""
    return -rate + rho * ad.relu(gamma_min - snr)
