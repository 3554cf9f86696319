"""Gaze-export scene analytics and static-perimetry blind-spot localization."""

__version__ = "0.1.0"
