"""Cross-modal interaction scores for multimodal models."""
__version__ = "0.1.0"
