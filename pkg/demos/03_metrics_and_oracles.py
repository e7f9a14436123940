#!/usr/bin/env python3
"""Performance metrics and their cross-checks.

Computes per-user SINR, sum-rate, and the sensing SNR for a random
beamformer, then validates the closed-form sensing SNR against the
Monte-Carlo estimator that simulates actual echo realizations.
"""

import numpy as np

from cfisac import (BeamformerSet, build_channels, desk_profile, mc_sensing_snr,
                    metrics_report, power_projection, sample_scene, sensing_snr)

cfg = desk_profile()
scene = sample_scene(cfg, 42)
channels = build_channels(cfg, scene)

rng = np.random.default_rng(7)
f = rng.normal(size=(cfg.n_tx, cfg.m_per_ap, cfg.n_streams)) \
    + 1j * rng.normal(size=(cfg.n_tx, cfg.m_per_ap, cfg.n_streams))
f = power_projection(20.0 * f, cfg.p_max)

report = metrics_report(cfg, channels, BeamformerSet(f))
print(f"per-user SINR (linear): {np.round(report.sinr, 2)}")
print(f"sum rate:               {report.sum_rate:.3f} bits/s/Hz")
print(f"sensing SNR:            {report.sensing_snr:.3f} (floor {cfg.gamma_min})")
print(f"per-AP power:           {np.round(report.per_ap_power, 3)} (budget {cfg.p_max})")
print(f"feasible: sensing={report.sensing_feasible} power={report.power_feasible}")

closed = sensing_snr(channels.atilde, f, cfg.chi2, cfg.xi2)
print("\nMonte-Carlo vs closed form:")
for n in (1000, 10000, 100000):
    est = mc_sensing_snr(channels.atilde, f, cfg.chi2, cfg.xi2, n, seed=1)
    print(f"  n={n:>6d}: estimate {est:9.4f}   rel. error {abs(est - closed) / closed:.4f}")
print(f"  closed form: {closed:.4f}")
