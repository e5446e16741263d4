"""Deterministic team-based Bomberman arena with pluggable team coordination."""

__version__ = "0.1.0"
