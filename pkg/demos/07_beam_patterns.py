#!/usr/bin/env python3
"""Beam-pattern export: evaluate the array gain of each stream over an
angular grid for one AP and locate the strongest lobes."""

import numpy as np

from cfisac import (GnnHyperparams, GnnModel, beam_pattern, build_channels,
                    build_graph, desk_profile)
from cfisac.geometry import angles_between, scene_from_positions

cfg = desk_profile()
# the fixed evaluation layout: two users and a target in front of AP 1
scene = scene_from_positions(cfg,
                             users=[[40.0, 40.0, 30.0], [140.0, 40.0, 20.0]],
                             target=[115.0, 115.0, 25.0], sample_seed=3)
channels = build_channels(cfg, scene)
graph = build_graph(cfg, channels)

model = GnnModel.init(GnnHyperparams(seed=2), cfg)
f_ap1 = model.beamformers_for(graph)[0]

n_phi, n_theta = 181, 91
phi_axis = np.linspace(-np.pi, np.pi, n_phi)
theta_axis = np.linspace(0.0, np.pi, n_theta)
phi, theta = [g.reshape(-1) for g in np.meshgrid(phi_axis, theta_axis, indexing="ij")]
gains = beam_pattern(f_ap1, phi, theta, cfg.m_v, cfg.m_h)
total = gains[:, 0].reshape(n_phi, n_theta)

peak = np.unravel_index(np.argmax(total), total.shape)
print(f"grid {n_phi}x{n_theta}; max total gain {total.max():.2f} at "
      f"phi={phi_axis[peak[0]]:.2f}, theta={theta_axis[peak[1]]:.2f} rad")

print("\nreference directions from AP 1:")
for name, point in (("user 1", scene.user_positions[0]),
                    ("user 2", scene.user_positions[1]),
                    ("target", scene.target_position)):
    a, t = angles_between(cfg.tx_ap_positions[0], point)
    print(f"  {name}: phi={a:6.3f}, theta={t:6.3f}")

print("\nper-stream peak gains (untrained model, random lobes):")
for s in range(1, gains.shape[1]):
    label = "sensing" if s == 1 else f"user {s - 1}"
    print(f"  {label:>8}: {gains[:, s].max():8.3f}")
print("\nafter training, lobes align with the users and the target; "
      "run the CLI `cfisac beampattern` on a trained model to export the CSV.")
