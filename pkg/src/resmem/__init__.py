"""Reservoir memory machines: echo state networks with an external memory."""

__version__ = "0.1.0"
