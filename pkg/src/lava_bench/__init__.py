"""Hermetic voice-to-voice latency and RVQ quality bench."""

__version__ = "0.1.0"
