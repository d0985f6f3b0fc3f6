"""Core module."""

from . import windows, gradengine, cyclicnorm, models, paradigms

__all__ = ["windows", "gradengine", "cyclicnorm", "models", "paradigms"]
