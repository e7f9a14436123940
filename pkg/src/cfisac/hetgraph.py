"""Heterogeneous graph over transmit-AP antennas, receive-AP antennas, users.

Topology is complete bipartite between tAP and UE nodes and between tAP and
rAP nodes (no UE-rAP or intra-type edges).  Channel entries act as edge
features, but they are stored inside the endpoint node features: each node's
initial feature vector collects every channel entry incident to it, complex
entries packed as interleaved (re, im) pairs.

Node indexing: tAP node i (0-based) is antenna i % M of transmit AP i // M,
and likewise for rAP nodes.  Per-node feature layouts (complex, pre-packing):

  tAP i:  [h[a, k, mi] for k]  ++  [atilde[a, j, mi, n] for j for n]
  rAP j:  [atilde[i, b, n, mj] for i for n]
  UE k:   [h[i, k, n] for i for n]

with a = i // M, mi = i % M, b = j // M, mj = j % M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .geometry import ChannelSet

NODE_TYPES = ("tAP", "rAP", "UE")


def pack_complex(v: np.ndarray) -> np.ndarray:
    """Interleave (re, im) pairs along the last axis; doubles its length."""
    v = np.asarray(v)
    out = np.empty(v.shape[:-1] + (2 * v.shape[-1],), dtype=np.float64)
    out[..., 0::2] = v.real
    out[..., 1::2] = v.imag
    return out


def unpack_complex(x: np.ndarray) -> np.ndarray:
    """Inverse of pack_complex."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2 != 0:
        raise ValueError(f"unpack_complex: last axis must be even, got {x.shape[-1]}")
    return x[..., 0::2] + 1j * x[..., 1::2]


def feature_dims(config: SystemConfig) -> dict[str, int]:
    """Packed (real) feature width per node type."""
    m = config.m_per_ap
    return {
        "tAP": 2 * (config.k_users + config.n_rx * m),
        "rAP": 2 * (config.n_tx * m),
        "UE": 2 * (config.n_tx * m),
    }


def node_counts(config: SystemConfig) -> dict[str, int]:
    m = config.m_per_ap
    return {"tAP": config.n_tx * m, "rAP": config.n_rx * m, "UE": config.k_users}


@dataclass
class HeteroGraph:
    """Typed nodes, their neighbor lists, and packed per-node features."""

    counts: dict[str, int]
    neighbors: dict[str, list[list[tuple[str, int]]]]
    features: dict[str, np.ndarray] = field(default_factory=dict)

    def num_nodes(self) -> int:
        return sum(self.counts.values())

    def num_edges(self) -> int:
        half = sum(len(nbrs) for lists in self.neighbors.values() for nbrs in lists)
        return half // 2


def build_graph(config: SystemConfig, channels: ChannelSet) -> HeteroGraph:
    """Construct topology and attach initial features from `channels`."""
    m = config.m_per_ap
    if channels.h.shape != (config.n_tx, config.k_users, m):
        raise ValueError(f"build_graph: channel shape {channels.h.shape} does not "
                         f"match config ({config.n_tx}, {config.k_users}, {m})")
    if channels.atilde.shape != (config.n_tx, config.n_rx, m, m):
        raise ValueError(f"build_graph: atilde shape {channels.atilde.shape} does not "
                         f"match config")
    counts = node_counts(config)
    ue_then_rap = ([("UE", k) for k in range(counts["UE"])] +
                   [("rAP", j) for j in range(counts["rAP"])])
    all_tap = [("tAP", i) for i in range(counts["tAP"])]
    neighbors = {
        "tAP": [list(ue_then_rap) for _ in range(counts["tAP"])],
        "rAP": [list(all_tap) for _ in range(counts["rAP"])],
        "UE": [list(all_tap) for _ in range(counts["UE"])],
    }
    graph = HeteroGraph(counts=counts, neighbors=neighbors)
    graph.features = init_features(graph, config, channels)
    return graph


def init_features(graph: HeteroGraph, config: SystemConfig,
                  channels: ChannelSet) -> dict[str, np.ndarray]:
    """Packed per-type feature matrices following the layouts above."""
    m = config.m_per_ap
    h, atilde = channels.h, channels.atilde
    # tAP node (a, mi): user entries h[a, :, mi], then row mi of each atilde[a, j]
    tap_h = h.transpose(0, 2, 1).reshape(graph.counts["tAP"], config.k_users)
    tap_a = atilde.transpose(0, 2, 1, 3).reshape(graph.counts["tAP"], config.n_rx * m)
    # rAP node (b, mj): column mj of each atilde[i, b], i-major
    rap_a = atilde.transpose(1, 3, 0, 2).reshape(graph.counts["rAP"], config.n_tx * m)
    # UE node k: h[i, k, n] over (i, n)
    ue_h = h.transpose(1, 0, 2).reshape(config.k_users, config.n_tx * m)
    return {
        "tAP": pack_complex(np.concatenate([tap_h, tap_a], axis=1)),
        "rAP": pack_complex(rap_a),
        "UE": pack_complex(ue_h),
    }
