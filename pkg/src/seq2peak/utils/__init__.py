"""Utils module."""

from . import validators, data_loader, checkpoint

__all__ = ["validators", "data_loader", "checkpoint"]
