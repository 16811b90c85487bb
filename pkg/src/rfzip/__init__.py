"""Lossless (and optionally lossy) codec for random-forest ensembles."""

from .container import (CompressedContainer, CompressOptions, SizeReport,
                        compress, decompress, inspect, load, predict_compressed)
from .forest import (Forest, Node, parse_forest, predict, serialize_forest,
                     validate_forest)
from .lossy import LossyPlan, LossyReport, estimate_error_stats, lossy_compress
from .trainer import Dataset, TrainConfig, load_csv, train

__version__ = "0.1.0"

__all__ = [
    "CompressOptions", "CompressedContainer", "Dataset", "Forest", "LossyPlan",
    "LossyReport", "Node", "SizeReport", "TrainConfig", "compress", "decompress",
    "estimate_error_stats", "inspect", "load", "load_csv", "lossy_compress",
    "parse_forest", "predict", "predict_compressed", "serialize_forest", "train",
    "validate_forest",
]
