"""Simplicial complexes from sensor-ordered mobile laser scans.

Pulses of a rotating scanner form a regular (angle, time) grid. Candidate
edges join echoes of neighboring pulses, are scored by their alignment with
the beam (C0) and collinearity with neighboring edges (C1), and the kept edges
are closed into triangles where the surface is locally planar.
"""

__version__ = "0.1.0"

from .complex_builder import ComplexStats, SimplicialComplex, assemble_complex, compare_complexes
from .errors import (
    ConfigurationError,
    ConsistencyError,
    DegenerateEdgeError,
    ParameterError,
    ScanFormatError,
    ScanOrderError,
    ScanParseError,
)
from .pipeline import Reconstruction, reconstruct, scored_candidates
from .regularity import COMPARISON_PARAMS, DEFAULT_PARAMS, PRESETS, FilterParams, generate_edge_candidates
from .scan_model import Scan, ScanConfig, SensorGrid, estimate_pulses_per_rotation, parse_scan, write_scan
from .synth_scanner import GroundTruth, Scene, ScannerConfig, evaluate_reconstruction, load_scene, simulate_scan
from .writers import RunManifest, read_ply_header, write_complex_mesh

__all__ = [
    "__version__",
    "ComplexStats", "SimplicialComplex", "assemble_complex", "compare_complexes",
    "ConfigurationError", "ConsistencyError", "DegenerateEdgeError", "ParameterError",
    "ScanFormatError", "ScanOrderError", "ScanParseError",
    "Reconstruction", "reconstruct", "scored_candidates",
    "COMPARISON_PARAMS", "DEFAULT_PARAMS", "PRESETS", "FilterParams", "generate_edge_candidates",
    "Scan", "ScanConfig", "SensorGrid", "estimate_pulses_per_rotation", "parse_scan", "write_scan",
    "GroundTruth", "Scene", "ScannerConfig", "evaluate_reconstruction", "load_scene", "simulate_scan",
    "RunManifest", "read_ply_header", "write_complex_mesh",
]
