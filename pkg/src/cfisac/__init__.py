"""Cell-free MIMO ISAC beamforming experimentation stack.

Simulate joint communication/multi-static-sensing scenes, train a
heterogeneous graph-attention network that emits per-AP beamforming
matrices, and benchmark against a null-space-projection + regularized
zero-forcing baseline.
"""

from .autodiff import Gradients, Tape, Tensor, grad_check
from .baseline import NsRzfResult, ns_rzf_beamformer, nullspace_sensing_direction, rzf_directions
from .config import SystemConfig, dbm_to_linear, desk_profile, paper_profile
from .dataset import Dataset, dataset_generate, load_dataset
from .geometry import (ChannelSet, Scene, angles_between, build_channels,
                       sample_scene, scene_from_positions, steering,
                       steering_horizontal, steering_vertical)
from .hetgraph import HeteroGraph, build_graph, init_features, pack_complex, unpack_complex
from .metrics import (BeamformerSet, MetricsReport, beam_pattern, mc_sensing_snr,
                      metrics_report, per_ap_power, power_projection,
                      sensing_snr, sinr_per_user, sum_rate)
from .model import GnnHyperparams, GnnModel
from .optim import AdamState, adam_step
from .training import TrainConfig, TrainLog, TrainingError, evaluate, penalty_loss, train
from .version import TOOL_VERSION

__version__ = TOOL_VERSION

__all__ = [
    "AdamState", "BeamformerSet", "ChannelSet", "Dataset", "GnnHyperparams",
    "GnnModel", "Gradients", "HeteroGraph", "MetricsReport", "NsRzfResult",
    "Scene", "SystemConfig", "Tape", "Tensor", "TrainConfig", "TrainLog",
    "TrainingError", "adam_step", "angles_between", "beam_pattern",
    "build_channels", "build_graph", "dataset_generate", "dbm_to_linear",
    "desk_profile", "evaluate", "grad_check", "init_features", "load_dataset",
    "mc_sensing_snr", "metrics_report", "ns_rzf_beamformer",
    "nullspace_sensing_direction", "pack_complex", "paper_profile",
    "penalty_loss", "per_ap_power", "power_projection", "rzf_directions",
    "sample_scene", "scene_from_positions", "sensing_snr", "sinr_per_user",
    "steering", "steering_horizontal", "steering_vertical", "sum_rate",
    "train", "unpack_complex",
]
