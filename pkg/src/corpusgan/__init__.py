"""Adversarial training of cross-corpus word embeddings and per-corpus document generators."""

__version__ = "0.1.0"
