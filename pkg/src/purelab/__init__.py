"""Adversarial purification laboratory for binary-feature malware detection."""

__version__ = "0.1.0"
