"""SVR hyperparameter objective served over the JSON-lines protocol."""

from .server import LOG10_RANGES, SvrScorer, decode_point, load_table, serve

__version__ = "0.1.0"
