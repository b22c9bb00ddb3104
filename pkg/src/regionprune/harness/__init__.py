"""Batch evaluation harness: dataset ingestion, run orchestration, timing,
overlay rendering, report figures, and the command-line interface."""

from .errors import ConfigError, DataError

__all__ = ["ConfigError", "DataError"]
