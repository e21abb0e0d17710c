"""Discretized path space: grids, segments, empirical laws and their distances."""
from src.pathspace.grid import Path, Segment, TimeGrid, make_grid, segment_at
from src.pathspace.law import LawFlow, law_from_paths
from src.pathspace.metrics import empirical_wp, segment_norms, sup_norm, wp_lambda

__all__ = [
    "Path",
    "Segment",
    "TimeGrid",
    "make_grid",
    "segment_at",
    "LawFlow",
    "law_from_paths",
    "empirical_wp",
    "segment_norms",
    "sup_norm",
    "wp_lambda",
]
