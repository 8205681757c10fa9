"""Discretized piece-space model: windows, strips, special paths, oracle."""

from .config import EdgeSpec, GraphOfGroupsConfig, VertexSpec
from .oracle import WindowOracle, brute_force_distance, window_oracle
from .paths import (
    Corner,
    SpecialPath,
    Strip,
    deck_shift,
    path_components,
    special_path,
    strip_between,
)
from .window import CKAWindow, Piece, PiecePoint, Plane, PlanePoint, build_window

__all__ = [
    "CKAWindow",
    "Corner",
    "EdgeSpec",
    "GraphOfGroupsConfig",
    "Piece",
    "PiecePoint",
    "Plane",
    "PlanePoint",
    "SpecialPath",
    "Strip",
    "VertexSpec",
    "WindowOracle",
    "brute_force_distance",
    "build_window",
    "deck_shift",
    "path_components",
    "special_path",
    "strip_between",
    "window_oracle",
]
