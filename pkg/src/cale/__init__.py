"""Concept-differentiation datasets, contrastive adapter training over frozen
embeddings, and lexical-semantic evaluation suites."""

__version__ = "0.1.0"
