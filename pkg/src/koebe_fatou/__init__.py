"""Numerical toolkit for attracting basins of rational maps.

Puzzle-piece partitions by iterated boundary lifting, curve metrology
(bounded turning, fatness), and Koebe circle-domain uniformization of
finitely connected truncations.
"""

from .curves import JordanPolyline, circle_polyline
from .geometry import (
    FatnessReport,
    TurningReport,
    diameter,
    distortion_probe,
    fatness,
    nesting_relation,
    smaller_subarc,
    turning,
    turning_constant,
)
from .pipeline import CORPUS, RunConfig, corpus_map, run_pipeline, search_mixed_cubic
from .poly import INF, Poly, chordal, is_infinity, polish_root, roots_all
from .puzzle import (
    End,
    InvariantDisk,
    PuzzleForest,
    PuzzlePiece,
    assemble_forest,
    build_invariant_disk,
    chain_degree,
    lift_boundary,
    piece_degree,
    track_ends,
)
from .ratmap import (
    CriticalOrbitReport,
    RationalMap,
    classify_postcritical,
    critical_points,
    evaluate,
    fixed_points,
    orbit,
    preimages,
)
from .uniformize import (
    Circle,
    CircleDomain,
    NumericalConformalMap,
    Truncation,
    circularity,
    exterior_map,
    koebe_uniformize,
    modulus_annulus,
    truncate_domain,
)

__all__ = [
    "CORPUS",
    "Circle",
    "CircleDomain",
    "CriticalOrbitReport",
    "End",
    "FatnessReport",
    "INF",
    "InvariantDisk",
    "JordanPolyline",
    "NumericalConformalMap",
    "Poly",
    "PuzzleForest",
    "PuzzlePiece",
    "RationalMap",
    "RunConfig",
    "Truncation",
    "TurningReport",
    "assemble_forest",
    "build_invariant_disk",
    "chain_degree",
    "chordal",
    "circle_polyline",
    "circularity",
    "classify_postcritical",
    "corpus_map",
    "critical_points",
    "diameter",
    "distortion_probe",
    "evaluate",
    "exterior_map",
    "fatness",
    "fixed_points",
    "is_infinity",
    "koebe_uniformize",
    "lift_boundary",
    "modulus_annulus",
    "nesting_relation",
    "orbit",
    "piece_degree",
    "polish_root",
    "preimages",
    "roots_all",
    "run_pipeline",
    "search_mixed_cubic",
    "smaller_subarc",
    "track_ends",
    "truncate_domain",
    "turning",
    "turning_constant",
]

__version__ = "0.1.0"
