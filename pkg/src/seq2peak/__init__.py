"""
Seq2Peak: peak-hour series forecasting.

Cyclic normalization, a differentiable daily-max decoder and a hybrid loss
around small forecasters, plus the harness comparing forecasting paradigms.
"""

__version__ = "1.0.0"

from .core import cyclicnorm, gradengine, models, paradigms, windows
from .utils import checkpoint, data_loader, validators
from .analysis import acf, experiments, summary, training

__all__ = [
    "cyclicnorm",
    "gradengine",
    "models",
    "paradigms",
    "windows",
    "checkpoint",
    "data_loader",
    "validators",
    "acf",
    "experiments",
    "summary",
    "training",
]
