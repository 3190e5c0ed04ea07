"""Wrist rehabilitation serious games: engine, tooling, and session service."""

__version__ = "0.1.0"

ENGINE_VERSION = f"wristgames/{__version__}"
