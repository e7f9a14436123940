"""Unsupervised training of the beamforming network and test-set evaluation.

The loss is the penalty form -R + rho * relu(gamma_min - snr), averaged over
a mini-batch; nothing else (no schedules, no weight decay).  Training is
deterministic for a fixed seed: the shuffle schedule derives from the seed,
batches are whole-batch vectorized so no reduction-order ambiguity exists,
and the best-validation weights are the ones returned.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape
from .config import SystemConfig
from .dataset import Dataset
from .hetgraph import build_graph
from .metrics import BeamformerSet, metrics_report
from .model import GnnModel
from .optim import AdamState, adam_step
from . import autodiff as ad
from .tapemetrics import (penalty_loss_tape, sensing_snr_tape, sinr_tape,
                          sum_rate_tape)


class TrainingError(RuntimeError):
    """Raised when an epoch aborts (e.g. non-finite loss)."""

    def __init__(self, message: str, sample_indices: list[int] | None = None):
        super().__init__(message)
        self.sample_indices = sample_indices or []


class ConfigMismatchError(ValueError):
    """Model and dataset describe different scenarios."""


@dataclass
class TrainConfig:
    lr: float = 1e-4
    rho: float = 1.0
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    checkpoint_every: int = 0   # epochs between periodic checkpoints; 0 = off
    val_fraction: float = 0.1
    power_ramp_epochs: int = 0  # 0 disables the power curriculum
    power_ramp_start_db: float = -25.0

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.rho < 0.0:
            raise ValueError("rho must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.power_ramp_epochs < 0:
            raise ValueError("power_ramp_epochs must be >= 0")

    def to_dict(self) -> dict:
        return {"lr": self.lr, "rho": self.rho, "batch_size": self.batch_size,
                "max_epochs": self.max_epochs, "patience": self.patience,
                "seed": self.seed, "checkpoint_every": self.checkpoint_every,
                "val_fraction": self.val_fraction,
                "power_ramp_epochs": self.power_ramp_epochs,
                "power_ramp_start_db": self.power_ramp_start_db}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_rate: float
    train_snr: float
    violation_rate: float
    val_loss: float
    seconds: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)

    def write_csv(self, path: str | Path, header_comments: list[str] | None = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", newline="") as fh:
            for line in header_comments or []:
                fh.write(line + "\n")
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "train_rate", "train_snr",
                             "violation_rate", "val_loss", "seconds"])
            for r in self.records:
                writer.writerow([r.epoch, repr(r.train_loss), repr(r.train_rate),
                                 repr(r.train_snr), repr(r.violation_rate),
                                 repr(r.val_loss), f"{r.seconds:.3f}"])
        os.replace(tmp, path)


def penalty_loss(rate: float, snr: float, gamma_min: float, rho: float) -> float:
    """Scalar loss -rate + rho * relu(gamma_min - snr)."""
    return -rate + rho * max(0.0, gamma_min - snr)


@dataclass
class BatchArrays:
    """Constant arrays for one batch of samples."""

    feats: dict[str, np.ndarray]       # (B, n, din) per type
    h_re: np.ndarray                   # (B, K, NM)
    h_im: np.ndarray
    a_re: np.ndarray                   # (B, n_tx, n_rx, M, M)
    a_im: np.ndarray
    indices: list[int]


def batch_arrays(dataset: Dataset, indices: list[int]) -> BatchArrays:
    """Rebuild graphs/channels for the given samples and stack them."""
    cfg = dataset.config
    feats = {t: [] for t in ("tAP", "rAP", "UE")}
    h_list, a_list = [], []
    for idx in indices:
        channels = dataset.channels(idx)
        graph = build_graph(cfg, channels)
        for t in feats:
            feats[t].append(graph.features[t])
        h_list.append(channels.stacked_h())
        a_list.append(channels.atilde)
    h = np.stack(h_list)
    a = np.stack(a_list)
    return BatchArrays(
        feats={t: np.stack(v) for t, v in feats.items()},
        h_re=h.real.copy(), h_im=h.imag.copy(),
        a_re=a.real.copy(), a_im=a.imag.copy(),
        indices=list(indices),
    )


def batch_loss(model: GnnModel, params, batch: BatchArrays, system: SystemConfig,
               rho: float):
    """Mean tape loss over a batch plus per-sample forward values."""
    b = len(batch.indices)
    nm = system.n_tx * system.m_per_ap
    f_re, f_im = model.forward_tape(params, batch.feats, system.p_max)
    fs_re = ad.reshape(f_re, (b, nm, system.n_streams))
    fs_im = ad.reshape(f_im, (b, nm, system.n_streams))
    sinr = sinr_tape(batch.h_re, batch.h_im, fs_re, fs_im, system.sigma2)
    rate = sum_rate_tape(sinr)
    snr = sensing_snr_tape(batch.a_re, batch.a_im, f_re, f_im,
                           system.chi2, system.xi2)
    losses = penalty_loss_tape(rate, snr, system.gamma_min, rho)
    return losses.mean(), {"losses": losses.data, "rates": rate.data, "snrs": snr.data}


def _val_loss(model: GnnModel, dataset: Dataset, indices: list[int],
              system: SystemConfig, rho: float, chunk: int = 256) -> float:
    total = 0.0
    params = model.param_tensors(None)
    for start in range(0, len(indices), chunk):
        part = indices[start:start + chunk]
        batch = batch_arrays(dataset, part)
        _, vals = batch_loss(model, params, batch, system, rho)
        total += float(vals["losses"].sum())
    return total / len(indices)


def save_checkpoint(path: str | Path, model: GnnModel, adam: AdamState, epoch: int) -> None:
    obj = {
        "model": model.to_dict(),
        "adam": {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                 "eps": adam.eps, "t": adam.t,
                 "m": {k: v.tolist() for k, v in adam.m.items()},
                 "v": {k: v.tolist() for k, v in adam.v.items()}},
        "epoch": epoch,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> tuple[GnnModel, AdamState, int]:
    obj = json.loads(Path(path).read_text())
    model = GnnModel.from_dict(obj["model"])
    a = obj["adam"]
    adam = AdamState(lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"],
                     t=a["t"],
                     m={k: np.asarray(v) for k, v in a["m"].items()},
                     v={k: np.asarray(v) for k, v in a["v"].items()})
    return model, adam, int(obj["epoch"])


def train(model: GnnModel, dataset: Dataset, tcfg: TrainConfig,
          out_dir: str | Path | None = None,
          log_every: int = 0) -> tuple[GnnModel, TrainLog]:
    """Mini-batch Adam training; returns the best-validation model and log.

    The validation set is the trailing `val_fraction` of the dataset's train
    split; the shuffle schedule is a pure function of the seed.

    When `power_ramp_epochs` is set, the per-AP power budget used in the
    forward pass is ramped log-linearly from `power_ramp_start_db` (relative
    to the real budget) up to the real budget over that many epochs.  Sum-rate
    training from scratch otherwise tends to collapse into serving a single
    user per sample: at full power the abandoned user's stream sits at a
    zero-gradient saddle (its rate is quadratic in its beam while interference
    from the served user keeps the payoff flat).  At low power the objective
    is interference-free and rewards every user, so the ramp starts training
    inside the all-users-served basin and lets the nulls deepen as power
    grows.  Validation, early stopping, and the returned model always use the
    real budget; epochs before the ramp ends are ineligible for best-model
    selection.
    """
    system = model.system
    if system.scenario_hash() != dataset.config.scenario_hash():
        raise ConfigMismatchError("model and dataset scenarios differ")
    train_idx = list(dataset.train_indices)
    n_val = max(1, int(len(train_idx) * tcfg.val_fraction)) if len(train_idx) > 1 else 0
    fit_idx, val_idx = train_idx[:len(train_idx) - n_val], train_idx[len(train_idx) - n_val:]
    if not fit_idx:
        fit_idx, val_idx = train_idx, train_idx

    adam = AdamState.for_params(model.weights, lr=tcfg.lr)
    rng = np.random.default_rng(tcfg.seed)
    log = TrainLog()
    best_val = math.inf
    best_weights = None
    stale = 0
    out_dir = Path(out_dir) if out_dir is not None else None

    for epoch in range(tcfg.max_epochs):
        t0 = time.perf_counter()
        if tcfg.power_ramp_epochs and epoch < tcfg.power_ramp_epochs:
            frac = epoch / tcfg.power_ramp_epochs
            db = tcfg.power_ramp_start_db * (1.0 - frac)
            epoch_system = system.replace(p_max=system.p_max * 10.0 ** (db / 10.0))
        else:
            epoch_system = system
        order = [fit_idx[i] for i in rng.permutation(len(fit_idx))]
        sums = {"loss": 0.0, "rate": 0.0, "snr": 0.0, "viol": 0.0}
        for start in range(0, len(order), tcfg.batch_size):
            part = order[start:start + tcfg.batch_size]
            batch = batch_arrays(dataset, part)
            tape = Tape()
            params = model.param_tensors(tape)
            loss, vals = batch_loss(model, params, batch, epoch_system, tcfg.rho)
            bad = np.flatnonzero(~np.isfinite(vals["losses"]))
            if bad.size:
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} for sample(s) "
                    f"{[part[i] for i in bad]}",
                    sample_indices=[part[i] for i in bad])
            grads = tape.backward(loss)
            adam_step(model.weights,
                      {k: grads.wrt(t) for k, t in params.items()}, adam)
            sums["loss"] += float(vals["losses"].sum())
            sums["rate"] += float(vals["rates"].sum())
            sums["snr"] += float(vals["snrs"].sum())
            sums["viol"] += int(np.sum(vals["snrs"] < system.gamma_min))
        n = len(order)
        val = _val_loss(model, dataset, val_idx, system, tcfg.rho) if val_idx else sums["loss"] / n
        record = EpochRecord(epoch=epoch,
                             train_loss=sums["loss"] / n,
                             train_rate=sums["rate"] / n,
                             train_snr=sums["snr"] / n,
                             violation_rate=sums["viol"] / n,
                             val_loss=val,
                             seconds=time.perf_counter() - t0)
        log.records.append(record)
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch:4d}  loss {record.train_loss:10.4f}  "
                  f"rate {record.train_rate:8.4f}  snr {record.train_snr:9.3f}  "
                  f"viol {record.violation_rate:5.3f}  val {val:10.4f}", flush=True)
        if epoch < tcfg.power_ramp_epochs:
            pass  # curriculum phase: not a best-model candidate
        elif val < best_val - 1e-12:
            best_val = val
            best_weights = copy.deepcopy(model.weights)
            stale = 0
        else:
            stale += 1
        if out_dir is not None and tcfg.checkpoint_every and \
                (epoch + 1) % tcfg.checkpoint_every == 0:
            save_checkpoint(out_dir / f"checkpoint_epoch{epoch:04d}.json",
                            model, adam, epoch)
        if stale > tcfg.patience:
            break

    if best_weights is not None:
        model.weights = best_weights
    model.train_meta.update({"train_config": tcfg.to_dict(),
                             "epochs_run": len(log.records),
                             "best_val_loss": best_val if best_weights is not None
                             else log.records[-1].val_loss})
    return model, log


@dataclass
class EvalRow:
    idx: int
    rate: float
    sensing_snr: float
    snr_feasible: bool
    p_ap_max: float


@dataclass
class EvalSummary:
    rows: list[EvalRow]
    mean_rate: float
    median_rate: float
    mean_snr: float
    feasible_frac: float
    max_p_ap: float


def evaluate(model: GnnModel, dataset: Dataset, split: str = "test",
             chunk: int = 256) -> EvalSummary:
    """Per-sample metrics (plain complex arithmetic) over a dataset split."""
    if model.system.scenario_hash() != dataset.config.scenario_hash():
        raise ConfigMismatchError("model and dataset scenarios differ")
    system = model.system
    indices = dataset.split(split)
    rows: list[EvalRow] = []
    for start in range(0, len(indices), chunk):
        part = indices[start:start + chunk]
        batch = batch_arrays(dataset, part)
        beams = model.forward(batch.feats, system.p_max)
        for b, idx in enumerate(part):
            channels = dataset.channels(idx)
            report = metrics_report(system, channels, BeamformerSet(beams[b]))
            rows.append(EvalRow(idx=idx, rate=report.sum_rate,
                                sensing_snr=report.sensing_snr,
                                snr_feasible=report.sensing_feasible,
                                p_ap_max=float(report.per_ap_power.max())))
    rates = np.array([r.rate for r in rows])
    snrs = np.array([r.sensing_snr for r in rows])
    return EvalSummary(
        rows=rows,
        mean_rate=float(rates.mean()),
        median_rate=float(np.median(rates)),
        mean_snr=float(snrs.mean()),
        feasible_frac=float(np.mean([r.snr_feasible for r in rows])),
        max_p_ap=float(max(r.p_ap_max for r in rows)),
    )
