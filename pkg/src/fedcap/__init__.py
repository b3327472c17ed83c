"""Byzantine-robust personalized federated learning simulator (FedCAP) with baselines and attacks."""
from .attacks import AttackSpec
from .client import ClientRecord, LocalConfig
from .data import DatasetSpec, PartitionPlan
from .errors import ConfigurationError, NumericalError, ProtocolError
from .harness import ExperimentConfig, load_config, run, simulate, sweep
from .model import Batch, ModelArch
from .server import CustomizationParams, ServerState

__all__ = [
    "AttackSpec", "Batch", "ClientRecord", "ConfigurationError", "CustomizationParams",
    "DatasetSpec", "ExperimentConfig", "LocalConfig", "ModelArch", "NumericalError",
    "PartitionPlan", "ProtocolError", "ServerState", "load_config", "run", "simulate", "sweep",
]
__version__ = "0.1.0"
