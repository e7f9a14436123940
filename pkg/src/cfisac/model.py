"""Graph-attention beamforming network over the heterogeneous ISAC graph.

Architecture per layer, for target node t with neighbors N(t):

  score_h(s)  = k_h(s)^T W_att[type(s)] q_h(t) / sqrt(d_head)
  att_h       = softmax over N(t) of score_h            (per head)
  msg_h(s)    = W_msg[type(s)] (W_v[type(s), h] g(s))
  g'(t)       = W_agg[type(t)] ReLU(concat_h sum_s att_h(s) msg_h(s)) + g(t)

Queries share one projector across target types; keys, values, attention
bilinear forms, message maps, and aggregators are node-type specific.
Because raw feature widths differ per type while the residual needs a
uniform width, a per-type linear encoder precedes layer 1.  The final
tAP states map linearly to 2(K+1) reals per antenna row -- the (re, im)
pairs of that row of the beamforming matrix -- followed by the per-AP
power projection.

The batched forward is tape-recorded end to end; `attention_scores` and
`messages_for` provide a slow per-node reference path used for testing.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .config import SystemConfig
from .hetgraph import HeteroGraph, feature_dims, node_counts
from .tapemetrics import power_projection_tape
from .version import TOOL_VERSION

MODEL_FORMAT_VERSION = 1

# per-target-type source ordering; must match hetgraph neighbor-list order
RELATIONS = {"tAP": ("UE", "rAP"), "rAP": ("tAP",), "UE": ("tAP",)}


@dataclass
class GnnHyperparams:
    layers: int = 2
    width: int = 64
    heads: int = 4
    init_scale: float = 1.0
    seed: int = 0
    use_bias: bool = False   # adds bias vectors to encoders, aggregators, head

    def __post_init__(self):
        if self.layers < 1 or self.heads < 1:
            raise ValueError("layers and heads must be >= 1")
        if self.width % self.heads != 0:
            raise ValueError(f"width {self.width} not divisible by heads {self.heads}")

    @property
    def d_head(self) -> int:
        return self.width // self.heads

    def to_dict(self) -> dict:
        return {"layers": self.layers, "width": self.width, "heads": self.heads,
                "init_scale": self.init_scale, "seed": self.seed,
                "use_bias": self.use_bias}

    @classmethod
    def from_dict(cls, d: dict) -> "GnnHyperparams":
        return cls(layers=int(d["layers"]), width=int(d["width"]), heads=int(d["heads"]),
                   init_scale=float(d["init_scale"]), seed=int(d["seed"]),
                   use_bias=bool(d.get("use_bias", False)))


class GnnModel:
    """Learnable weights plus the scenario they were built for."""

    def __init__(self, hyper: GnnHyperparams, system: SystemConfig,
                 weights: dict[str, np.ndarray], train_meta: dict | None = None):
        self.hyper = hyper
        self.system = system
        self.weights = weights
        self.train_meta = dict(train_meta or {})

    # -- construction -------------------------------------------------------
    @classmethod
    def init(cls, hyper: GnnHyperparams, system: SystemConfig) -> "GnnModel":
        """Fresh model with U(-s/sqrt(fan_in), +s/sqrt(fan_in)) weights."""
        dims = feature_dims(system)
        d, dh = hyper.width, hyper.d_head
        specs: list[tuple[str, tuple[int, int]]] = [
            (f"enc.{t}", (d, dims[t])) for t in ("tAP", "rAP", "UE")]
        for l in range(hyper.layers):
            specs.append((f"l{l}.q", (d, d)))
            for t in ("tAP", "rAP", "UE"):
                specs += [(f"l{l}.k.{t}", (d, d)), (f"l{l}.v.{t}", (d, d)),
                          (f"l{l}.att.{t}", (dh, dh)), (f"l{l}.msg.{t}", (dh, dh)),
                          (f"l{l}.agg.{t}", (d, d))]
        specs.append(("out", (2 * system.n_streams, d)))

        rng = np.random.default_rng(hyper.seed)
        weights = {}
        for name, shape in specs:
            bound = hyper.init_scale / math.sqrt(shape[1])
            weights[name] = rng.uniform(-bound, bound, size=shape)
        if hyper.use_bias:
            for t in ("tAP", "rAP", "UE"):
                weights[f"enc.{t}.b"] = np.zeros(d)
            for l in range(hyper.layers):
                for t in ("tAP", "rAP", "UE"):
                    weights[f"l{l}.agg.{t}.b"] = np.zeros(d)
            weights["out.b"] = np.zeros(2 * system.n_streams)
        return cls(hyper, system, weights)

    @property
    def dims(self) -> dict[str, int]:
        return feature_dims(self.system)

    @property
    def counts(self) -> dict[str, int]:
        return node_counts(self.system)

    # -- forward ------------------------------------------------------------
    def param_tensors(self, tape: Tape | None) -> dict[str, Tensor]:
        """Tracked parameters when a tape is given, constants otherwise."""
        if tape is None:
            return {k: Tensor(w) for k, w in self.weights.items()}
        return {k: tape.parameter(w) for k, w in self.weights.items()}

    def _heads(self, t: Tensor) -> Tensor:
        b, n, d = t.shape
        split = ad.reshape(t, (b, n, self.hyper.heads, self.hyper.d_head))
        return ad.transpose(split, (0, 2, 1, 3))

    def encode(self, params: Mapping[str, Tensor], feats: Mapping[str, np.ndarray]) -> dict[str, Tensor]:
        """Per-type linear maps of packed features into the hidden width."""
        out = {}
        for t in ("tAP", "rAP", "UE"):
            x = feats[t] if isinstance(feats[t], Tensor) else Tensor(feats[t])
            enc = ad.matmul(x, ad.transpose(params[f"enc.{t}"]))
            if f"enc.{t}.b" in params:
                enc = enc + params[f"enc.{t}.b"]
            out[t] = enc
        return out

    def layer(self, params: Mapping[str, Tensor], l: int,
              states: Mapping[str, Tensor]) -> dict[str, Tensor]:
        """One synchronous message-passing update of all node types."""
        scale = 1.0 / math.sqrt(self.hyper.d_head)
        keys, values = {}, {}
        for t in ("tAP", "rAP", "UE"):
            keys[t] = self._heads(ad.matmul(states[t], ad.transpose(params[f"l{l}.k.{t}"])))
            values[t] = self._heads(ad.matmul(states[t], ad.transpose(params[f"l{l}.v.{t}"])))

        new_states = {}
        for tgt, sources in RELATIONS.items():
            q = self._heads(ad.matmul(states[tgt], ad.transpose(params[f"l{l}.q"])))
            q_t = ad.transpose(q, (0, 1, 3, 2))                       # (B, H, dh, n_t)
            score_parts, msg_parts = [], []
            for src in sources:
                kw = ad.matmul(keys[src], params[f"l{l}.att.{src}"])  # (B, H, n_s, dh)
                score_parts.append(ad.matmul(kw, q_t) * scale)        # (B, H, n_s, n_t)
                msg_parts.append(ad.matmul(values[src], ad.transpose(params[f"l{l}.msg.{src}"])))
            scores = score_parts[0] if len(score_parts) == 1 else ad.concat(score_parts, axis=2)
            msgs = msg_parts[0] if len(msg_parts) == 1 else ad.concat(msg_parts, axis=2)
            att = ad.softmax(scores, axis=2)
            agg = ad.matmul(ad.transpose(att, (0, 1, 3, 2)), msgs)    # (B, H, n_t, dh)
            b, _, n_t, _ = agg.shape
            merged = ad.reshape(ad.transpose(agg, (0, 2, 1, 3)), (b, n_t, self.hyper.width))
            update = ad.matmul(ad.relu(merged), ad.transpose(params[f"l{l}.agg.{tgt}"]))
            if f"l{l}.agg.{tgt}.b" in params:
                update = update + params[f"l{l}.agg.{tgt}.b"]
            new_states[tgt] = update + states[tgt]
        return new_states

    def head(self, params: Mapping[str, Tensor], tap_states: Tensor,
             p_max: float) -> tuple[Tensor, Tensor]:
        """Map final tAP states to projected beamformers (B, n_tx, M, K+1).

        The linear output is scaled by sqrt(p_max) so the learnable part
        works in budget-normalized units; without this the weights would
        have to grow by orders of magnitude just to reach the power level.
        """
        out = ad.matmul(tap_states, ad.transpose(params["out"]))
        if "out.b" in params:
            out = out + params["out.b"]
        out = out * math.sqrt(p_max)
        b = out.shape[0]
        n_tx, m, s = self.system.n_tx, self.system.m_per_ap, self.system.n_streams
        f_re = ad.reshape(out[:, :, 0::2], (b, n_tx, m, s))
        f_im = ad.reshape(out[:, :, 1::2], (b, n_tx, m, s))
        return power_projection_tape(f_re, f_im, p_max)

    def forward_tape(self, params: Mapping[str, Tensor], feats: Mapping[str, np.ndarray],
                     p_max: float | None = None) -> tuple[Tensor, Tensor]:
        """Full forward pass on batched features; returns (re, im) beams."""
        states = self.encode(params, feats)
        for l in range(self.hyper.layers):
            states = self.layer(params, l, states)
        return self.head(params, states["tAP"],
                         self.system.p_max if p_max is None else p_max)

    def forward(self, feats: Mapping[str, np.ndarray],
                p_max: float | None = None) -> np.ndarray:
        """Untracked forward; returns complex beams (B, n_tx, M, K+1)."""
        f_re, f_im = self.forward_tape(self.param_tensors(None), feats, p_max)
        return f_re.data + 1j * f_im.data

    def beamformers_for(self, graph: HeteroGraph, p_max: float | None = None) -> np.ndarray:
        """Single-sample convenience: complex (n_tx, M, K+1) for one graph."""
        feats = {t: graph.features[t][None, :, :] for t in ("tAP", "rAP", "UE")}
        return self.forward(feats, p_max)[0]

    # -- reference (per-node) path, used for testing -------------------------
    def attention_scores(self, l: int, graph: HeteroGraph,
                         states: Mapping[str, np.ndarray],
                         node_type: str, node_idx: int) -> np.ndarray:
        """(heads, n_neighbors) softmax weights for one target node."""
        nbrs = graph.neighbors[node_type][node_idx]
        if not nbrs:
            raise ValueError(f"attention_scores: node {node_type}/{node_idx} has no neighbors")
        w = self.weights
        h_count, dh = self.hyper.heads, self.hyper.d_head
        g_t = states[node_type][node_idx]
        raw = np.empty((h_count, len(nbrs)))
        for h in range(h_count):
            w_q = w[f"l{l}.q"][h * dh:(h + 1) * dh]
            q = w_q @ g_t
            for n, (src_type, src_idx) in enumerate(nbrs):
                w_k = w[f"l{l}.k.{src_type}"][h * dh:(h + 1) * dh]
                k = w_k @ states[src_type][src_idx]
                raw[h, n] = k @ w[f"l{l}.att.{src_type}"] @ q / math.sqrt(dh)
        e = np.exp(raw - raw.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    def messages_for(self, l: int, graph: HeteroGraph,
                     states: Mapping[str, np.ndarray],
                     node_type: str, node_idx: int) -> np.ndarray:
        """(heads, n_neighbors, d_head) messages from one node's neighbors."""
        nbrs = graph.neighbors[node_type][node_idx]
        w = self.weights
        h_count, dh = self.hyper.heads, self.hyper.d_head
        out = np.empty((h_count, len(nbrs), dh))
        for h in range(h_count):
            for n, (src_type, src_idx) in enumerate(nbrs):
                w_v = w[f"l{l}.v.{src_type}"][h * dh:(h + 1) * dh]
                v = w_v @ states[src_type][src_idx]
                out[h, n] = w[f"l{l}.msg.{src_type}"] @ v
        return out

    def layer_forward(self, l: int, states: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Single-sample untracked layer update on (n, d) state arrays."""
        params = self.param_tensors(None)
        batched = {t: Tensor(states[t][None, :, :]) for t in states}
        return {t: s.data[0] for t, s in self.layer(params, l, batched).items()}

    def encode_inputs(self, graph: HeteroGraph) -> dict[str, np.ndarray]:
        """Single-sample untracked encoding of a graph's packed features."""
        params = self.param_tensors(None)
        feats = {t: graph.features[t][None, :, :] for t in ("tAP", "rAP", "UE")}
        return {t: s.data[0] for t, s in self.encode(params, feats).items()}

    # -- persistence ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "tool_version": TOOL_VERSION,
            "hyperparams": self.hyper.to_dict(),
            "dims": {"features": self.dims, "counts": self.counts,
                     "n_streams": self.system.n_streams},
            "system": self.system.to_dict(),
            "config_hash": self.system.config_hash(),
            "scenario_hash": self.system.scenario_hash(),
            "seed": self.hyper.seed,
            "train_meta": self.train_meta,
            "weights": {k: w.tolist() for k, w in self.weights.items()},
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")
        os.replace(tmp, path)

    @classmethod
    def from_dict(cls, d: dict) -> "GnnModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {d.get('format_version')}")
        return cls(
            hyper=GnnHyperparams.from_dict(d["hyperparams"]),
            system=SystemConfig.from_dict(d["system"]),
            weights={k: np.asarray(v, dtype=np.float64) for k, v in d["weights"].items()},
            train_meta=d.get("train_meta", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "GnnModel":
        return cls.from_dict(json.loads(Path(path).read_text()))
