#!/usr/bin/env python3
"""From channels to beams: heterogeneous graph construction and a forward
pass through the attention network, with the resulting metrics."""

import numpy as np

from cfisac import (BeamformerSet, GnnHyperparams, GnnModel, build_channels,
                    build_graph, desk_profile, metrics_report, sample_scene)

cfg = desk_profile()
scene = sample_scene(cfg, 7)
channels = build_channels(cfg, scene)

graph = build_graph(cfg, channels)
print(f"node counts: {graph.counts}  ({graph.num_nodes()} nodes, "
      f"{graph.num_edges()} undirected edges)")
for t in ("tAP", "rAP", "UE"):
    print(f"  {t:>3} packed feature width: {graph.features[t].shape[1]}")

model = GnnModel.init(GnnHyperparams(layers=2, width=64, heads=4, seed=0), cfg)
print(f"\nnetwork: {model.hyper.layers} layers, width {model.hyper.width}, "
      f"{model.hyper.heads} heads, {sum(w.size for w in model.weights.values())} parameters")

# attention weights for one transmit-antenna node, layer 1
states = model.encode_inputs(graph)
att = model.attention_scores(0, graph, states, "tAP", 0)
print(f"attention over {att.shape[1]} neighbors, per-head sums: "
      f"{np.round(att.sum(axis=1), 12)}")
print(f"attention mass on the {cfg.k_users} user nodes: "
      f"{np.round(att[:, :cfg.k_users].sum(axis=1), 3)} per head")

beams = model.beamformers_for(graph)
report = metrics_report(cfg, channels, BeamformerSet(beams))
print(f"\nuntrained beams: rate {report.sum_rate:.3f}, sensing SNR "
      f"{report.sensing_snr:.3f}, per-AP power {np.round(report.per_ap_power, 2)}")
print("(training moves these; see 06_training_walkthrough.py)")
