"""
SoftDropConnect

Uncertainty estimation for neural networks with Dropout, DropConnect,
SoftDropConnect masking and Bayes-by-Backprop, evaluated through Monte-Carlo
predictive statistics.
"""

__version__ = "1.0.0"

from .core.layers import ForwardContext, Network
from .core.tensor import Tape, Tensor
from .evaluation.inference import mc_predict, mc_predict_batch
from .evaluation.metrics import PredictiveSummary, mutual_information
from .masking.masks import MaskSpec, make_spec

__all__ = [
    "Tensor",
    "Tape",
    "Network",
    "ForwardContext",
    "MaskSpec",
    "make_spec",
    "PredictiveSummary",
    "mutual_information",
    "mc_predict",
    "mc_predict_batch",
]
