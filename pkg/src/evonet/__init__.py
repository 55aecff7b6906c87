"""Self-evolving multilayer perceptron for streaming classification and regression."""

from .config import AblationSwitches, ConfigError, ExperimentConfig, StreamSpec, build_stream, load_config
from .drift import DriftDetector, find_switching_point, hoeffding_bound
from .harness import BatchError, BatchMetrics, Learner, RunResult, run_prequential
from .memory import AdaptiveMemory, chi_square_thresholds, replay_set
from .network import EvolvingNetwork, NumericError, ShapeError, UnsupportedOperation, confidence_ratio
from .relevance import layer_scores, learning_rates, pearson
from .significance import (SignificanceState, adapt_width, expected_output, network_bias_squared,
                           network_variance, unit_contributions)
from .streams import (CsvStreamConfig, RegressionConfig, SeaConfig, StreamBatch, generate_drifting_regression,
                      generate_sea, ingest_csv)

__version__ = "0.1.0"

__all__ = [
    "AblationSwitches", "AdaptiveMemory", "BatchError", "BatchMetrics", "ConfigError", "CsvStreamConfig",
    "DriftDetector", "EvolvingNetwork", "ExperimentConfig", "Learner", "NumericError", "RegressionConfig",
    "RunResult", "SeaConfig", "ShapeError", "SignificanceState", "StreamBatch", "StreamSpec",
    "UnsupportedOperation", "adapt_width", "build_stream", "chi_square_thresholds", "confidence_ratio",
    "expected_output", "find_switching_point", "generate_drifting_regression", "generate_sea",
    "hoeffding_bound", "ingest_csv", "layer_scores", "learning_rates", "load_config", "network_bias_squared",
    "network_variance", "pearson", "replay_set", "run_prequential", "unit_contributions",
]
