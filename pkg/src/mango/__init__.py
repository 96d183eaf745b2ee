"""Online continual learning with per-parameter gradient gating and
meta-learned layer-wise stability coefficients."""

from .buffer import EmptyBufferError, ReplayBuffer
from .config import ExperimentConfig, METHOD_FLAGS, parse_config
from .estimator import ContinualMLPClassifier
from .metrics import AccuracyMatrix, aaa, bwt, final_accuracy, wc_acc
from .model import ModelConfig, ParameterStore, init_model
from .optimizer import (MangoConfig, MangoOptimizer, StabilityCoefficients,
                        StepDiagnostics)
from .runner import RunReport, emit_reports, run_experiment
from .streams import (StreamSpec, Task, load_file_stream, make_cil_stream,
                      make_dil_stream, minibatch_iter)

__version__ = "0.1.0"

__all__ = [
    "AccuracyMatrix", "ContinualMLPClassifier", "EmptyBufferError",
    "ExperimentConfig", "METHOD_FLAGS", "MangoConfig", "MangoOptimizer",
    "ModelConfig", "ParameterStore", "ReplayBuffer", "RunReport",
    "StabilityCoefficients", "StepDiagnostics", "StreamSpec", "Task",
    "aaa", "bwt", "emit_reports", "final_accuracy", "init_model",
    "load_file_stream", "make_cil_stream", "make_dil_stream",
    "minibatch_iter", "parse_config", "run_experiment", "wc_acc",
]
