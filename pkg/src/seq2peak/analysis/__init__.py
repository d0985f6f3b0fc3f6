"""Analysis module."""

from . import acf, training, summary, experiments

__all__ = ["acf", "training", "summary", "experiments"]
