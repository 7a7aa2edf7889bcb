"""Replay-buffer engineering for RL-based quantum circuit optimization."""

__version__ = "0.1.0"
