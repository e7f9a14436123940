#!/usr/bin/env python3
"""End-to-end miniature experiment: generate a small dataset, train for a
few epochs, evaluate, and compare with the NS-RZF baseline.

Uses a deliberately tiny scenario so the whole script runs in well under a
minute; see the README for the full desk-scale recipe.
"""

import tempfile
from pathlib import Path

import numpy as np

from cfisac import (GnnHyperparams, GnnModel, SystemConfig, TrainConfig,
                    dataset_generate, evaluate, load_dataset, metrics_report,
                    ns_rzf_beamformer, train)
from cfisac.geometry import target_steering_per_ap

cfg = SystemConfig(n_tx=2, n_rx=2, m_v=2, m_h=2, k_users=2,
                   tx_ap_positions=[[0, 100, 20], [200, 100, 20]],
                   rx_ap_positions=[[100, 0, 20], [100, 200, 20]],
                   p_max=100.0, gamma_min=2.0)

workdir = Path(tempfile.mkdtemp(prefix="cfisac_demo_"))
dataset_generate(cfg, n_samples=300, master_seed=1, out_path=workdir / "data")
ds = load_dataset(workdir / "data")
print(f"dataset: {len(ds)} samples ({len(ds.train_indices)} train / "
      f"{len(ds.test_indices)} test) in {workdir}")

model = GnnModel.init(GnnHyperparams(layers=2, width=32, heads=4, seed=0), cfg)
before = evaluate(model, ds, "test")
print(f"untrained: mean rate {before.mean_rate:.3f}, "
      f"sensing-feasible {100 * before.feasible_frac:.0f}%")

model, log = train(model, ds, TrainConfig(lr=2e-3, batch_size=16, max_epochs=30,
                                          patience=30, seed=0))
print(f"trained {len(log.records)} epochs "
      f"(loss {log.records[0].train_loss:.2f} -> {log.records[-1].train_loss:.2f})")

after = evaluate(model, ds, "test")
print(f"trained:   mean rate {after.mean_rate:.3f}, "
      f"sensing-feasible {100 * after.feasible_frac:.0f}%, "
      f"max per-AP power {after.max_p_ap:.1f} / {cfg.p_max}")

rates = []
for idx in ds.test_indices:
    channels = ds.channels(idx)
    scene = ds.records[idx].scene()
    res = ns_rzf_beamformer(cfg, channels,
                            target_steering=target_steering_per_ap(cfg, scene))
    rates.append(metrics_report(cfg, channels, res.beams).sum_rate)
print(f"NS-RZF:    mean rate {np.mean(rates):.3f}")
