"""Token-view and mask-view embedding extraction with a masked language model."""

__version__ = "0.1.0"
