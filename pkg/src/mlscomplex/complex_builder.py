"""Triangles from kept edges, planarity filtering, and the point/edge/triangle partition.

Each grid quad ``(i, i+1, i+n, i+n+1)`` is split along its ``i -> i+n+1``
diagonal, the only diagonal that is a neighbor pair in the hexagonal
topology, giving the two elementary triangles ``(i, i+1, i+n+1)`` and
``(i, i+n, i+n+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterator

import numpy as np

from ._parallel import map_chunks
from .errors import ConsistencyError
from .regularity import EdgeCandidates, FilterParams, _dot, _norm, edge_keys, expand_pairs
from .scan_model import Scan, SensorGrid, forward_directions

POINT, EDGE, TRIANGLE = 0, 1, 2
# display colors per simplex dimension
COLORS = {TRIANGLE: (255, 0, 0), EDGE: (0, 255, 0), POINT: (0, 0, 0)}


@dataclass(frozen=True)
class Triangle:
    vertices: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]
    normal: tuple[float, float, float]
    source_quad: int


@dataclass(frozen=True, eq=False)
class Triangles:
    """Column store of triangles; ``a < b < c`` are global echo indices."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    quad: np.ndarray
    kind: np.ndarray
    normal: np.ndarray
    sin_min: np.ndarray

    def __len__(self) -> int:
        return len(self.a)

    def take(self, idx) -> "Triangles":
        return Triangles(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def edge_keys(self, n_echoes: int) -> np.ndarray:
        """``(T, 3)`` keys of the edges ab, bc, ac."""
        return np.stack([
            edge_keys(self.a, self.b, n_echoes),
            edge_keys(self.b, self.c, n_echoes),
            edge_keys(self.a, self.c, n_echoes),
        ], axis=1)

    def record(self, k: int, scan: Scan) -> Triangle:
        verts = tuple((int(scan.echo_pulse[e]), int(scan.echo_rank[e])) for e in (self.a[k], self.b[k], self.c[k]))
        return Triangle(vertices=verts, normal=tuple(float(v) for v in self.normal[k]), source_quad=int(self.quad[k]))

    @classmethod
    def empty(cls) -> "Triangles":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, z, np.zeros((0, 3)), np.zeros(0))


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.stack([
        u[:, 1] * v[:, 2] - u[:, 2] * v[:, 1],
        u[:, 2] * v[:, 0] - u[:, 0] * v[:, 2],
        u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0],
    ], axis=1)


def triangle_geometry(scan: Scan, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit normals facing the sensor of pulse ``a``, and the sine of the smallest angle.

    Zero-area triangles get a NaN normal and ``sin_min = 0``.
    """
    pa, pb, pc = scan.positions[a], scan.positions[b], scan.positions[c]
    cr = _cross(pb - pa, pc - pa)
    area2 = _norm(cr)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = cr / area2[:, None]
        to_sensor = scan.origin[scan.echo_pulse[a]] - pa
        flip = _dot(normal, to_sensor) < 0
        normal[flip] = -normal[flip]
        sides = np.sort(np.stack([_norm(pb - pa), _norm(pc - pb), _norm(pc - pa)], axis=1), axis=1)
        # smallest angle sits between the two longest sides
        sin_min = np.where(area2 > 0, area2 / (sides[:, 1] * sides[:, 2]), 0.0)
    return normal, np.minimum(sin_min, 1.0)


def _is_member(keys: np.ndarray, sorted_keys: np.ndarray) -> np.ndarray:
    if len(sorted_keys) == 0:
        return np.zeros(len(keys), dtype=bool)
    pos = np.searchsorted(sorted_keys, keys)
    pos = np.minimum(pos, len(sorted_keys) - 1)
    return sorted_keys[pos] == keys


def build_triangle_candidates(kept_edges: EdgeCandidates, grid: SensorGrid, scan: Scan,
                              threads: int = 1) -> Triangles:
    """Every elementary triangle whose three edges are all kept."""
    if len(kept_edges) == 0:
        return Triangles.empty()
    E = scan.n_echoes
    dirs = forward_directions(grid)
    diag_offset = dirs[-1]
    # for n = 1 both splits name the same pulse triple
    mid_offsets = (1,) if grid.n == 1 else (1, grid.n)
    kept_keys = np.unique(kept_edges.keys(E))
    diag = np.flatnonzero(kept_edges.d == diag_offset)
    d_quad, d_a, d_c = kept_edges.p[diag], kept_edges.i[diag], kept_edges.j[diag]
    cnt, off = scan.echo_count, scan.echo_offsets

    def work(lo: int, hi: int):
        parts = []
        for kind, mo in enumerate(mid_offsets):
            quad, a, c = d_quad[lo:hi], d_a[lo:hi], d_c[lo:hi]
            mid = quad + mo
            row, _, kb = expand_pairs(np.ones(len(mid), dtype=np.int64), cnt[mid])
            b = off[mid][row] + kb
            a, c, quad = a[row], c[row], quad[row]
            ok = _is_member(edge_keys(a, b, E), kept_keys) & _is_member(edge_keys(b, c, E), kept_keys)
            parts.append((a[ok], b[ok], c[ok], quad[ok], np.full(int(ok.sum()), kind)))
        return tuple(np.concatenate(x) for x in zip(*parts))

    chunks = map_chunks(work, len(diag), threads)
    a, b, c, quad, kind = (np.concatenate(x) for x in zip(*chunks))
    order = np.lexsort((c, b, a, kind, quad))
    a, b, c, quad, kind = a[order], b[order], c[order], quad[order], kind[order]
    normal, sin_min = triangle_geometry(scan, a, b, c)
    return Triangles(a=a, b=b, c=c, quad=quad, kind=kind, normal=normal, sin_min=sin_min)


def planarity_deviation(cands: Triangles, n_echoes: int, threads: int = 1) -> np.ndarray:
    """Worst ``1 - |n . n_u|`` over edge-adjacent candidates ``u``; 0 when there are none.

    Neighbors with an undefined normal are ignored.
    """
    T = len(cands)
    if T == 0:
        return np.zeros(0)
    keys = cands.edge_keys(n_echoes).ravel()
    owner = np.repeat(np.arange(T), 3)
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    valid = np.all(np.isfinite(cands.normal), axis=1)

    def work(lo: int, hi: int) -> np.ndarray:
        k = keys[3 * lo:3 * hi]
        start = np.searchsorted(sk, k, side="left")
        stop = np.searchsorted(sk, k, side="right")
        row, _, o = expand_pairs(np.ones(len(k), dtype=np.int64), stop - start)
        me = owner[3 * lo:3 * hi][row]
        other = owner[order[start[row] + o]]
        use = (other != me) & valid[me] & valid[other]
        me, other = me[use], other[use]
        dev = 1.0 - np.abs(_dot(cands.normal[me], cands.normal[other]))
        worst = np.zeros(hi - lo)
        np.maximum.at(worst, me - lo, dev)
        return worst

    return np.concatenate(map_chunks(work, T, threads, min_chunk=2048))


def triangle_mask(cands: Triangles, params: FilterParams, n_echoes: int, threads: int = 1) -> np.ndarray:
    degenerate_ok = cands.sin_min >= params.epsilon
    planar_ok = planarity_deviation(cands, n_echoes, threads) <= params.omega
    return degenerate_ok & planar_ok


def filter_triangles(cands: Triangles, params: FilterParams, n_echoes: int, threads: int = 1) -> Triangles:
    """Candidates that are not slivers and agree in orientation with all their neighbors.

    Neighbors are taken among the candidates, not among accepted triangles, so
    the result does not depend on visiting order.
    """
    return cands.take(triangle_mask(cands, params, n_echoes, threads))


# ---------------------------------------------------------------------------
# Complex
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexStats:
    n_triangles: int
    n_standalone_edges: int
    n_standalone_points: int

    def to_dict(self) -> dict:
        return {"triangles": self.n_triangles, "edges": self.n_standalone_edges, "points": self.n_standalone_points}

    def __iter__(self) -> Iterator[int]:
        return iter((self.n_triangles, self.n_standalone_edges, self.n_standalone_points))


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """Echoes plus kept simplices.

    ``edges`` is the full kept-edge set; ``standalone_edges`` the subset that
    bounds no triangle. ``echo_dim`` gives each echo's class: 2 if it is a
    triangle vertex, 1 if it only touches standalone edges, 0 otherwise.
    """

    scan: Scan
    edges: EdgeCandidates
    triangles: Triangles
    standalone_edges: EdgeCandidates
    standalone_points: np.ndarray
    echo_dim: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.scan.n_echoes

    def stats(self) -> ComplexStats:
        return complex_stats(self)


def assemble_complex(scan: Scan, kept_edges: EdgeCandidates, kept_triangles: Triangles) -> SimplicialComplex:
    E = scan.n_echoes
    edge_k = kept_edges.keys(E)
    sorted_edges = np.unique(edge_k)
    if len(sorted_edges) != len(edge_k):
        raise ConsistencyError("kept edge set contains duplicates")
    tri_k = kept_triangles.edge_keys(E).ravel()
    missing = ~_is_member(tri_k, sorted_edges)
    if np.any(missing):
        t = int(np.flatnonzero(missing)[0] // 3)
        raise ConsistencyError(f"triangle {t} has an edge outside the kept-edge set")
    bounding = _is_member(edge_k, np.unique(tri_k))
    standalone = kept_edges.take(~bounding)

    dim = np.zeros(E, dtype=np.int8)
    dim[standalone.i] = EDGE
    dim[standalone.j] = EDGE
    for v in (kept_triangles.a, kept_triangles.b, kept_triangles.c):
        dim[v] = TRIANGLE
    touched = np.zeros(E, dtype=bool)
    touched[kept_edges.i] = True
    touched[kept_edges.j] = True
    points = np.flatnonzero(~touched)
    dim.setflags(write=False)
    return SimplicialComplex(
        scan=scan, edges=kept_edges, triangles=kept_triangles,
        standalone_edges=standalone, standalone_points=points, echo_dim=dim,
    )


def complex_stats(cx: SimplicialComplex) -> ComplexStats:
    return ComplexStats(
        n_triangles=len(cx.triangles),
        n_standalone_edges=len(cx.standalone_edges),
        n_standalone_points=len(cx.standalone_points),
    )


@dataclass(frozen=True)
class ClassDelta:
    before: int
    after: int
    delta: int
    ratio: float | None


@dataclass(frozen=True)
class ComplexDelta:
    triangles: ClassDelta
    edges: ClassDelta
    points: ClassDelta

    @property
    def is_zero(self) -> bool:
        return self.triangles.delta == self.edges.delta == self.points.delta == 0

    def to_dict(self) -> dict:
        return {name: vars(getattr(self, name)) for name in ("triangles", "edges", "points")}


def compare_complexes(a: ComplexStats, b: ComplexStats) -> ComplexDelta:
    """Signed change ``b - a`` and ratio ``b / a`` per simplex class."""

    def one(x: int, y: int) -> ClassDelta:
        return ClassDelta(before=x, after=y, delta=y - x, ratio=(y / x) if x else None)

    return ComplexDelta(
        triangles=one(a.n_triangles, b.n_triangles),
        edges=one(a.n_standalone_edges, b.n_standalone_edges),
        points=one(a.n_standalone_points, b.n_standalone_points),
    )


def partition_counts(cx: SimplicialComplex) -> tuple[int, int, int]:
    """Echo counts in the (point, edge, triangle) classes; they sum to the echo count."""
    counts = np.bincount(cx.echo_dim, minlength=3)
    return int(counts[POINT]), int(counts[EDGE]), int(counts[TRIANGLE])


def sin_smallest_angle(p0, p1, p2) -> float:
    """Scalar helper mirroring the sliver test, handy for one-off checks."""
    a, b, c = (np.asarray(x, dtype=float) for x in (p0, p1, p2))
    n = np.cross(b - a, c - a)
    area2 = math.sqrt(float(n @ n))
    sides = sorted(math.dist(*pair) for pair in ((a, b), (b, c), (a, c)))
    return 0.0 if area2 == 0 else min(1.0, area2 / (sides[1] * sides[2]))
