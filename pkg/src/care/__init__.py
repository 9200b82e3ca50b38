"""Joint entity and relation extraction with a co-attention interaction stack."""

__version__ = "0.1.0"
