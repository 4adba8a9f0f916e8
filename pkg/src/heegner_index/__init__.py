"""Heegner point indexes of rank-one elliptic curves over Q."""

from .curve_store import CurveRecord, parse_curve_file
from .ec_arith import RationalPoint
from .heegner import conjecture_check, global_index, trace
from .quadforms import nu

__version__ = "0.1.0"

__all__ = ["CurveRecord", "RationalPoint", "conjecture_check", "global_index",
           "nu", "parse_curve_file", "trace"]
