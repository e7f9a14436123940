import numpy as np
import pytest

from cfisac.config import SystemConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def tiny_config(**overrides) -> SystemConfig:
    """Smallest meaningful scenario: 1 tx AP, 1 rx AP, M=2, one user."""
    base = dict(
        n_tx=1, n_rx=1, m_v=1, m_h=2, k_users=1,
        tx_ap_positions=[[0.0, 100.0, 20.0]],
        rx_ap_positions=[[100.0, 0.0, 20.0]],
        p_max=10.0, gamma_min=0.5,
    )
    base.update(overrides)
    return SystemConfig(**base)


def small_config(**overrides) -> SystemConfig:
    """Desk-scale geometry but tiny arrays, for fast structural tests."""
    base = dict(
        n_tx=2, n_rx=2, m_v=2, m_h=2, k_users=2,
        tx_ap_positions=[[0.0, 100.0, 20.0], [200.0, 100.0, 20.0]],
        rx_ap_positions=[[100.0, 0.0, 20.0], [100.0, 200.0, 20.0]],
        p_max=100.0, gamma_min=5.0,
    )
    base.update(overrides)
    return SystemConfig(**base)
