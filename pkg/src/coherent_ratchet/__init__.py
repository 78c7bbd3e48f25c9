"""Propagation of excitonic coherence between weakly coupled complexes."""

__version__ = "0.1.0"
