"""Result writers: PLY/OBJ meshes, stats JSON/CSV, candidate diagnostics and run manifests.

Every floating-point value is written with 9 significant digits so output
files are byte-stable across platforms and worker counts.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .complex_builder import COLORS, ComplexStats, SimplicialComplex
from .regularity import EdgeCandidates, FilterParams, c0_weighted_literal, echo_range_of_edge
from .scan_model import Scan

FLOAT_FMT = "%.9g"
DIAGNOSTIC_COLUMNS = ("p", "e1", "q", "e2", "length", "c0", "c1", "c0_effective", "kept",
                      "c0_literal", "c0w_literal")
SWEEP_COLUMNS = ("kappa", "triangles", "edges", "points", "kept_edges")


def fmt(x: float) -> str:
    return FLOAT_FMT % x


def _write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------


def ply_text(cx: SimplicialComplex, color: bool = True) -> str:
    """ASCII PLY with every echo as a vertex, standalone edges and triangles.

    Vertices carry their class in a ``dim`` property (2 triangle vertex, 1
    standalone-edge vertex, 0 otherwise); with ``color`` set, vertices, edges
    and faces also get the red/green/black class colors.
    """
    pos = cx.scan.positions
    n_v, n_e, n_f = len(pos), len(cx.standalone_edges), len(cx.triangles)
    rgb = ("property uchar red", "property uchar green", "property uchar blue")
    head = ["ply", "format ascii 1.0", f"element vertex {n_v}",
            "property float x", "property float y", "property float z"]
    if color:
        head += rgb
    head += ["property uchar dim", f"element edge {n_e}", "property int vertex1", "property int vertex2"]
    if color:
        head += rgb
    head += [f"element face {n_f}", "property list uchar int vertex_indices"]
    if color:
        head += rgb
    head.append("end_header")

    buf = io.StringIO()
    buf.write("\n".join(head) + "\n")
    dim = cx.echo_dim
    for k in range(n_v):
        x, y, z = pos[k]
        line = f"{fmt(x)} {fmt(y)} {fmt(z)}"
        if color:
            r, g, b = COLORS[int(dim[k])]
            line += f" {r} {g} {b}"
        buf.write(f"{line} {int(dim[k])}\n")
    edge_rgb = " %d %d %d" % COLORS[1] if color else ""
    for i, j in zip(cx.standalone_edges.i.tolist(), cx.standalone_edges.j.tolist()):
        buf.write(f"{i} {j}{edge_rgb}\n")
    face_rgb = " %d %d %d" % COLORS[2] if color else ""
    t = cx.triangles
    for a, b, c in zip(t.a.tolist(), t.b.tolist(), t.c.tolist()):
        buf.write(f"3 {a} {b} {c}{face_rgb}\n")
    return buf.getvalue()


def write_complex_mesh(cx: SimplicialComplex, path: str | Path, color: bool = True) -> None:
    """Write the complex as ASCII PLY. Raises ``OSError`` if ``path`` is unwritable."""
    _write_text(path, ply_text(cx, color))


def read_ply_header(path: str | Path) -> dict[str, int]:
    """Element counts declared in a PLY header, e.g. ``{"vertex": 30, "edge": 2, "face": 1}``."""
    counts: dict[str, int] = {}
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise ValueError(f"{path}: not a PLY file")
        for raw in fh:
            line = raw.decode("ascii").strip()
            if line == "end_header":
                return counts
            parts = line.split()
            if parts[0] == "element":
                counts[parts[1]] = int(parts[2])
    raise ValueError(f"{path}: PLY header not terminated")


def write_complex_obj(cx: SimplicialComplex, path: str | Path) -> None:
    """Lossy OBJ export: vertices, triangle faces and standalone edges as polylines.

    OBJ has no per-element colors, so the class partition is only recoverable
    from connectivity.
    """
    buf = io.StringIO()
    for x, y, z in cx.scan.positions:
        buf.write(f"v {fmt(x)} {fmt(y)} {fmt(z)}\n")
    t = cx.triangles
    for a, b, c in zip(t.a.tolist(), t.b.tolist(), t.c.tolist()):
        buf.write(f"f {a + 1} {b + 1} {c + 1}\n")
    for i, j in zip(cx.standalone_edges.i.tolist(), cx.standalone_edges.j.tolist()):
        buf.write(f"l {i + 1} {j + 1}\n")
    _write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Stats
# ---------------------------------------------------------------------------


def _params_json(params: FilterParams) -> dict:
    return {k: (None if v is None else float(v)) for k, v in params.to_dict().items()}


def stats_dict(stats: ComplexStats, params: FilterParams, n_p: float) -> dict:
    return {**stats.to_dict(), "params": _params_json(params), "n_p": float(n_p)}


def write_stats_json(stats: ComplexStats, params: FilterParams, n_p: float, path: str | Path) -> None:
    _write_text(path, json.dumps(stats_dict(stats, params, n_p), indent=2, sort_keys=True) + "\n")


def sweep_csv(rows: list[dict]) -> str:
    """One row per kappa with the simplex counts, ordered by kappa."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in sorted(rows, key=lambda r: r["kappa"]):
        w.writerow([fmt(r["kappa"]), r["triangles"], r["edges"], r["points"], r["kept_edges"]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def diagnostics_text(scan: Scan, cands: EdgeCandidates, kept: np.ndarray, kappa: float) -> str:
    """One row per candidate edge; pulse columns use the scan's pulse ids.

    Besides the kept/score columns it carries the literal ``1 - e.l`` score and
    its additive kappa weighting, for comparison with the relaxed form used by
    the filter.
    """
    if cands.c0 is None or cands.c1 is None or cands.c0_effective is None:
        raise ValueError("diagnostics need scored candidates with c0_effective")
    w_lit = c0_weighted_literal(cands.c0_literal, kappa, echo_range_of_edge(scan, cands), scan.l_max) \
        if len(cands) else np.zeros(0)
    buf = io.StringIO()
    buf.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
    pid = scan.pulse_id
    cols = zip(pid[cands.p].tolist(), cands.e1.tolist(), pid[cands.q].tolist(), cands.e2.tolist(),
               cands.length.tolist(), cands.c0.tolist(), cands.c1.tolist(), cands.c0_effective.tolist(),
               kept.tolist(), cands.c0_literal.tolist(), w_lit.tolist())
    for p, e1, q, e2, ln, c0, c1, eff, k, lit, wl in cols:
        buf.write(f"{p},{e1},{q},{e2},{fmt(ln)},{fmt(c0)},{fmt(c1)},{fmt(eff)},{int(k)},{fmt(lit)},{fmt(wl)}\n")
    return buf.getvalue()


def write_diagnostics(scan: Scan, cands: EdgeCandidates, kept: np.ndarray, kappa: float,
                      path: str | Path) -> None:
    _write_text(path, diagnostics_text(scan, cands, kept, kappa))


def read_diagnostics(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything needed to rerun a command and reproduce its outputs."""

    command: str
    inputs: list[str]
    params: dict
    n_p: float
    n_p_source: str                 # "estimated" or "override"
    version: str
    threads: int
    outputs: list[str] = field(default_factory=list)
    options: dict = field(default_factory=dict)
    timings_ms: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)

    def write(self, path: str | Path) -> None:
        _write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))
