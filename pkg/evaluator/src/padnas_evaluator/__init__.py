"""Reference external evaluator for the line-JSON oracle protocol."""

from .server import EvalServer, VersionMismatch
from .surrogate import surrogate_accuracy

__all__ = ["EvalServer", "VersionMismatch", "surrogate_accuracy"]
