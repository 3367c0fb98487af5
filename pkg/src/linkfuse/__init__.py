"""Friendship inference from multimodal social posts."""

__version__ = "0.1.0"
