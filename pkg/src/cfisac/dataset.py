"""Dataset generation and persistence.

A dataset directory holds `manifest.json` (config echo, seeds, split indices)
and `samples.jsonl` with one record per line.  Records store only positions
and complex gains; channels are re-derived on load, which keeps files small
and round-trips exact (floats are serialized with Python's shortest
round-trip repr).  Every per-sample seed derives deterministically from
(master_seed, index), so regeneration is byte-identical.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SystemConfig, canonical_json
from .geometry import ChannelSet, Scene, build_channels, sample_scene
from .rng import derive_seed
from .version import TOOL_VERSION

FORMAT_VERSION = 1


def _atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


@dataclass
class SampleRecord:
    idx: int
    seed: int
    users: np.ndarray     # (K, 3)
    target: np.ndarray    # (3,)
    beta: np.ndarray      # (n_tx, K) complex

    def scene(self) -> Scene:
        return Scene(self.users, self.target, self.beta, self.seed)

    def to_json_line(self) -> str:
        obj = {
            "idx": self.idx,
            "seed": self.seed,
            "users": self.users.tolist(),
            "target": self.target.tolist(),
            "beta": [[[z.real, z.imag] for z in row] for row in self.beta],
        }
        return json.dumps(obj, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "SampleRecord":
        obj = json.loads(line)
        beta = np.asarray(obj["beta"], dtype=np.float64)
        return cls(
            idx=int(obj["idx"]),
            seed=int(obj["seed"]),
            users=np.asarray(obj["users"], dtype=np.float64),
            target=np.asarray(obj["target"], dtype=np.float64),
            beta=beta[..., 0] + 1j * beta[..., 1],
        )


@dataclass
class Dataset:
    config: SystemConfig
    records: list[SampleRecord]
    train_indices: list[int]
    test_indices: list[int]
    master_seed: int

    def __len__(self) -> int:
        return len(self.records)

    def channels(self, idx: int) -> ChannelSet:
        return build_channels(self.config, self.records[idx].scene())

    def split(self, name: str) -> list[int]:
        if name == "train":
            return self.train_indices
        if name == "test":
            return self.test_indices
        if name == "all":
            return list(range(len(self.records)))
        raise ValueError(f"unknown split '{name}' (expected train/test/all)")


def _record_for(config: SystemConfig, master_seed: int, idx: int) -> SampleRecord:
    seed = derive_seed(master_seed, idx)
    scene = sample_scene(config, seed)
    return SampleRecord(idx=idx, seed=seed, users=scene.user_positions,
                        target=scene.target_position, beta=scene.beta)


def dataset_generate(config: SystemConfig, n_samples: int, master_seed: int,
                     out_path: str | Path, train_fraction: float = 0.8,
                     threads: int = 1) -> dict:
    """Generate a dataset directory; returns the manifest dict.

    Sample generation is independent per index; writing is serialized in
    index order so output bytes never depend on `threads`.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)

    indices = range(n_samples)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(lambda i: _record_for(config, master_seed, i), indices))
    else:
        records = [_record_for(config, master_seed, i) for i in indices]

    n_train = int(n_samples * train_fraction)
    manifest = {
        "format_version": FORMAT_VERSION,
        "tool_version": TOOL_VERSION,
        "n_samples": n_samples,
        "master_seed": master_seed,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "scenario_hash": config.scenario_hash(),
        "train_indices": list(range(n_train)),
        "test_indices": list(range(n_train, n_samples)),
    }
    _atomic_write(out / "samples.jsonl",
                  "".join(r.to_json_line() + "\n" for r in records))
    _atomic_write(out / "manifest.json", canonical_json(manifest) + "\n")
    return manifest


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
        lines = (path / "samples.jsonl").read_text().splitlines()
    except OSError as e:
        raise OSError(f"cannot read dataset at {path}: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format_version "
                         f"{manifest.get('format_version')} at {path}")
    records = [SampleRecord.from_json_line(line) for line in lines if line]
    if len(records) != manifest["n_samples"]:
        raise ValueError(f"dataset at {path}: manifest says {manifest['n_samples']} "
                         f"samples, file has {len(records)}")
    return Dataset(
        config=SystemConfig.from_dict(manifest["config"]),
        records=records,
        train_indices=list(manifest["train_indices"]),
        test_indices=list(manifest["test_indices"]),
        master_seed=int(manifest["master_seed"]),
    )
