"""Step-bounded halting oracles driving small quantum-measurement experiments."""

__version__ = "0.1.0"
