"""Labelled spatio-temporal graph datasets from AIS vessel tracks."""

from .errors import AisGraphError, ConfigError, InputError, InvariantViolation
from .graph import TemporalGraph, build_temporal_graph
from .pipeline import Config, run_pipeline

__all__ = [
    "AisGraphError",
    "Config",
    "ConfigError",
    "InputError",
    "InvariantViolation",
    "TemporalGraph",
    "build_temporal_graph",
    "run_pipeline",
]
