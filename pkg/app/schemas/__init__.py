from .base import ConfigModel, RecordModel, describe_validation_error
from .model import HistogramConfig, ModelConfig, PRESETS, get_preset
from .objective import LossWeights, BlurConfig, FeatureExtractorConfig, LossRecord
from .dataset import NoiseModel, PairMeta, DatasetManifest
from .training import AdamConfig, TrainConfig, AmplifierTrainConfig
from .bench import BenchResult

__all__ = [
    # Base
    "ConfigModel", "RecordModel", "describe_validation_error",

    # Model
    "HistogramConfig", "ModelConfig", "PRESETS", "get_preset",

    # Objective
    "LossWeights", "BlurConfig", "FeatureExtractorConfig", "LossRecord",

    # Dataset
    "NoiseModel", "PairMeta", "DatasetManifest",

    # Training
    "AdamConfig", "TrainConfig", "AmplifierTrainConfig",

    # Bench
    "BenchResult",
]
