"""Tail-aware distributionally robust risk evaluation."""

__version__ = "0.1.0"
