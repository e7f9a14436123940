"""Scenario configuration: AP layout, array sizes, statistics, and budgets.

All quantities are linear (no dB anywhere inside the library); the CLI
converts dBm at its boundary.  Variances may be given as scalars and are
expanded to full per-link arrays.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def dbm_to_linear(p_dbm: float) -> float:
    """Transmit power in linear units relative to unit noise power."""
    return 10.0 ** (p_dbm / 10.0)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON encoding used for hashing and on-disk artifacts."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def short_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def _expand(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(shape, float(arr))
    if arr.shape != shape:
        raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name}: variances must be positive")
    return arr


@dataclass
class SystemConfig:
    """Static description of one cell-free ISAC scenario."""

    n_tx: int                      # transmit AP count
    n_rx: int                      # receive AP count
    m_v: int                       # vertical antennas per AP
    m_h: int                       # horizontal antennas per AP
    k_users: int
    tx_ap_positions: np.ndarray    # (n_tx, 3) meters
    rx_ap_positions: np.ndarray    # (n_rx, 3) meters
    area_x: tuple[float, float] = (0.0, 200.0)
    area_y: tuple[float, float] = (0.0, 200.0)
    z_range: tuple[float, float] = (0.0, 35.0)
    zeta2: np.ndarray | float = 0.5     # (n_tx, k_users) comm gain variance
    chi2: np.ndarray | float = 0.1      # (n_tx, n_rx) sensing gain variance
    sigma2: np.ndarray | float = 1.0    # (k_users,) user noise variance
    xi2: np.ndarray | float = 1.0       # (n_rx,) receive-AP noise variance
    p_max: float = 1000.0               # per-AP power budget, linear
    gamma_min: float = 15.0             # sensing SNR floor, linear
    extras: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "m_v", "m_h", "k_users"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.p_max <= 0.0:
            raise ValueError("p_max must be positive")
        if self.gamma_min < 0.0:
            raise ValueError("gamma_min must be >= 0")
        self.tx_ap_positions = np.asarray(self.tx_ap_positions, dtype=np.float64)
        self.rx_ap_positions = np.asarray(self.rx_ap_positions, dtype=np.float64)
        if self.tx_ap_positions.shape != (self.n_tx, 3):
            raise ValueError(f"tx_ap_positions: expected ({self.n_tx}, 3)")
        if self.rx_ap_positions.shape != (self.n_rx, 3):
            raise ValueError(f"rx_ap_positions: expected ({self.n_rx}, 3)")
        self.zeta2 = _expand(self.zeta2, (self.n_tx, self.k_users), "zeta2")
        self.chi2 = _expand(self.chi2, (self.n_tx, self.n_rx), "chi2")
        self.sigma2 = _expand(self.sigma2, (self.k_users,), "sigma2")
        self.xi2 = _expand(self.xi2, (self.n_rx,), "xi2")

    @property
    def m_per_ap(self) -> int:
        return self.m_v * self.m_h

    @property
    def n_streams(self) -> int:
        return self.k_users + 1

    def to_dict(self) -> dict:
        return {
            "n_tx": self.n_tx,
            "n_rx": self.n_rx,
            "m_v": self.m_v,
            "m_h": self.m_h,
            "k_users": self.k_users,
            "tx_ap_positions": self.tx_ap_positions.tolist(),
            "rx_ap_positions": self.rx_ap_positions.tolist(),
            "area_x": list(self.area_x),
            "area_y": list(self.area_y),
            "z_range": list(self.z_range),
            "zeta2": self.zeta2.tolist(),
            "chi2": self.chi2.tolist(),
            "sigma2": self.sigma2.tolist(),
            "xi2": self.xi2.tolist(),
            "p_max": self.p_max,
            "gamma_min": self.gamma_min,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        if "p_max_dbm" in d:
            d["p_max"] = dbm_to_linear(float(d.pop("p_max_dbm")))
        d.pop("extras", None)
        return cls(
            n_tx=int(d["n_tx"]), n_rx=int(d["n_rx"]),
            m_v=int(d["m_v"]), m_h=int(d["m_h"]), k_users=int(d["k_users"]),
            tx_ap_positions=d["tx_ap_positions"],
            rx_ap_positions=d["rx_ap_positions"],
            area_x=tuple(d.get("area_x", (0.0, 200.0))),
            area_y=tuple(d.get("area_y", (0.0, 200.0))),
            z_range=tuple(d.get("z_range", (0.0, 35.0))),
            zeta2=d.get("zeta2", 0.5),
            chi2=d.get("chi2", 0.1),
            sigma2=d.get("sigma2", 1.0),
            xi2=d.get("xi2", 1.0),
            p_max=float(d.get("p_max", 1000.0)),
            gamma_min=float(d.get("gamma_min", 15.0)),
        )

    def scenario_hash(self) -> str:
        """Hash of everything that shapes scenes and channels.

        Excludes p_max and gamma_min: those are constraint knobs swept in
        experiments and do not alter dataset bytes or channel statistics, so
        a model trained at one (p_max, gamma_min) remains evaluable on the
        same dataset at another.
        """
        d = self.to_dict()
        d.pop("p_max")
        d.pop("gamma_min")
        return short_hash(d)

    def config_hash(self) -> str:
        return short_hash(self.to_dict())

    def replace(self, **kw) -> "SystemConfig":
        d = self.to_dict()
        d.update(kw)
        return SystemConfig.from_dict(d)


_COMMON = dict(
    n_tx=2,
    n_rx=2,
    tx_ap_positions=[[0.0, 100.0, 20.0], [200.0, 100.0, 20.0]],
    rx_ap_positions=[[100.0, 0.0, 20.0], [100.0, 200.0, 20.0]],
)


def paper_profile() -> SystemConfig:
    """Full-size scenario: 64-antenna UPAs, 4 users, 200 m square area."""
    return SystemConfig(m_v=4, m_h=16, k_users=4,
                        p_max=dbm_to_linear(30.0), gamma_min=30.0, **_COMMON)


def desk_profile() -> SystemConfig:
    """Reduced scenario for fast end-to-end runs: 8-antenna UPAs, 2 users."""
    return SystemConfig(m_v=2, m_h=4, k_users=2,
                        p_max=dbm_to_linear(30.0), gamma_min=15.0, **_COMMON)


PROFILES = {"paper": paper_profile, "desk": desk_profile}
