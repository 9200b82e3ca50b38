"""Offline exporter: frozen contextual embeddings to CAREEMB1 archives."""

__version__ = "0.1.0"
