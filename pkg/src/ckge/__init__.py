"""Continual knowledge-graph embedding with adaptive dimension growth."""
from .config import RunConfig, TrainConfig
from .kg import Delta, EvolvingKG, Snapshot, Vocabulary, load_sequence, load_snapshot_dir
from .model import TransE
from .trainer import run_pipeline

__all__ = ["RunConfig", "TrainConfig", "Delta", "EvolvingKG", "Snapshot", "Vocabulary",
           "load_sequence", "load_snapshot_dir", "TransE", "run_pipeline"]
__version__ = "0.1.0"
