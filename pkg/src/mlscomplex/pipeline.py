"""End-to-end reconstruction of a simplicial complex from a scan."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .complex_builder import (
    SimplicialComplex,
    Triangles,
    assemble_complex,
    build_triangle_candidates,
    triangle_mask,
)
from .regularity import EdgeCandidates, FilterParams, edge_mask, generate_edge_candidates, score_candidates
from .scan_model import Scan, SensorGrid


@dataclass
class Reconstruction:
    grid: SensorGrid
    params: FilterParams
    candidates: EdgeCandidates      # scored, with c0_effective for params.kappa
    kept_mask: np.ndarray
    triangle_candidates: Triangles
    complex: SimplicialComplex
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def kept_edges(self) -> EdgeCandidates:
        return self.complex.edges


def scored_candidates(scan: Scan, grid: SensorGrid | None = None, threads: int = 1) -> EdgeCandidates:
    grid = grid or SensorGrid.from_scan(scan)
    return score_candidates(scan, grid, generate_edge_candidates(scan, grid, threads), threads)


def reconstruct(scan: Scan, params: FilterParams | None = None, threads: int = 1,
                candidates: EdgeCandidates | None = None) -> Reconstruction:
    """Run candidate generation, edge filtering, triangle filtering and assembly.

    Pass precomputed ``candidates`` (from :func:`scored_candidates`) to reuse
    the kappa-independent scores across a parameter sweep.
    """
    params = params or FilterParams()
    grid = SensorGrid.from_scan(scan)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if candidates is None:
        candidates = scored_candidates(scan, grid, threads)
    t1 = time.perf_counter()
    keep, eff = edge_mask(candidates, params, scan)
    candidates = candidates.with_scores(c0_effective=eff)
    kept = candidates.take(keep)
    t2 = time.perf_counter()
    tri_cands = build_triangle_candidates(kept, grid, scan, threads)
    tri_keep = triangle_mask(tri_cands, params, scan.n_echoes, threads)
    t3 = time.perf_counter()
    cx = assemble_complex(scan, kept, tri_cands.take(tri_keep))
    t4 = time.perf_counter()

    timings["score_edges"] = (t1 - t0) * 1e3
    timings["filter_edges"] = (t2 - t1) * 1e3
    timings["triangles"] = (t3 - t2) * 1e3
    timings["assemble"] = (t4 - t3) * 1e3
    return Reconstruction(grid, params, candidates, keep, tri_cands, cx, timings)
