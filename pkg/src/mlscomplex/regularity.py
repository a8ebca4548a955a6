"""Candidate edges between echoes of neighboring pulses, and their scores.

Every echo of pulse ``p`` is paired with every echo of pulse ``p + d`` for each
forward direction ``d``. Each pair gets

* ``c0``: |cos| of the angle between the edge and the beam of pulse ``p``
  (0 for an edge orthogonal to the beam, 1 for an edge along it);
* ``c1``: collinearity with the best continuing edge on both sides along the
  same grid direction (0 for a straight chain), 1 per missing side;
* ``c0_effective``: ``max(0, c0 - kappa * l_p / l_max)``, which loosens the
  first criterion for echoes far from the sensor.

An edge is kept when it is short enough and passes either criterion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ._parallel import map_chunks
from .errors import DegenerateEdgeError, ParameterError
from .scan_model import Scan, SensorGrid, forward_directions

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterParams:
    alpha_m: float = 5e-2
    lambda_: float = 1e-3
    kappa: float = 0.0
    l_max_edge: float | None = None
    omega: float = 1e-3
    epsilon: float = 5e-3

    def __post_init__(self) -> None:
        for name in ("alpha_m", "lambda_", "omega", "epsilon"):
            v = getattr(self, name)
            if math.isnan(v) or v < 0:
                raise ParameterError(f"{name} must be >= 0, got {v}")
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ParameterError(f"kappa must be finite and >= 0, got {self.kappa}")
        if self.l_max_edge is not None and not self.l_max_edge > 0:
            raise ParameterError(f"l_max_edge must be > 0, got {self.l_max_edge}")

    def to_dict(self) -> dict:
        return {
            "alpha_m": self.alpha_m,
            "lambda": self.lambda_,
            "kappa": self.kappa,
            "max_edge_len": self.l_max_edge,
            "omega": self.omega,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterParams":
        return cls(
            alpha_m=d["alpha_m"], lambda_=d["lambda"], kappa=d["kappa"],
            l_max_edge=d.get("max_edge_len"), omega=d["omega"], epsilon=d["epsilon"],
        )


# Parameter sets used for the kappa study and for the weighted/unweighted comparison.
DEFAULT_PARAMS = FilterParams()
COMPARISON_PARAMS = FilterParams(alpha_m=0.05, lambda_=1e-4, kappa=0.4, omega=0.1, epsilon=5e-3)
PRESETS = {"default": DEFAULT_PARAMS, "comparison": COMPARISON_PARAMS}


@dataclass(frozen=True)
class EdgeCandidate:
    p: int
    e1: int
    q: int
    e2: int
    length: float
    c0: float = math.nan
    c1: float = math.nan
    c0_effective: float = math.nan


@dataclass(frozen=True, eq=False)
class EdgeCandidates:
    """Column store of candidate edges, ordered by (p, direction, e1, e2).

    ``i`` and ``j`` are global echo indices of the endpoints on pulses ``p``
    and ``q = p + d``; ``unit`` points from ``i`` to ``j``.
    """

    p: np.ndarray
    q: np.ndarray
    i: np.ndarray
    j: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    length: np.ndarray
    unit: np.ndarray
    c0: np.ndarray | None = None
    c1: np.ndarray | None = None
    c0_literal: np.ndarray | None = None
    c0_effective: np.ndarray | None = None
    n_degenerate: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.p)

    @property
    def d(self) -> np.ndarray:
        return self.q - self.p

    def keys(self, n_echoes: int) -> np.ndarray:
        return edge_keys(self.i, self.j, n_echoes)

    def take(self, idx) -> "EdgeCandidates":
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            kw[f.name] = v[idx] if isinstance(v, np.ndarray) else v
        return EdgeCandidates(**kw)

    def __getitem__(self, k: int) -> EdgeCandidate:
        def _v(a):
            return math.nan if a is None else float(a[k])

        return EdgeCandidate(
            p=int(self.p[k]), e1=int(self.e1[k]), q=int(self.q[k]), e2=int(self.e2[k]),
            length=float(self.length[k]), c0=_v(self.c0), c1=_v(self.c1), c0_effective=_v(self.c0_effective),
        )

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def with_scores(self, **scores) -> "EdgeCandidates":
        return replace(self, **scores)


def edge_keys(i: np.ndarray, j: np.ndarray, n_echoes: int) -> np.ndarray:
    """Integer key of an undirected echo pair (lower index first)."""
    lo = np.minimum(i, j).astype(np.int64)
    hi = np.maximum(i, j).astype(np.int64)
    return lo * max(n_echoes, 1) + hi


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # spelled out so every row is evaluated the same way whatever the chunking
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


def _norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(a[:, 0] * a[:, 0] + a[:, 1] * a[:, 1] + a[:, 2] * a[:, 2])


def expand_pairs(count_a: np.ndarray, count_b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (a, b) index combinations per row, row-major.

    Returns ``(row, ka, kb)`` where row ``r`` contributes
    ``count_a[r] * count_b[r]`` entries with ``ka`` in ``range(count_a[r])``.
    """
    m = count_a.astype(np.int64) * count_b.astype(np.int64)
    total = int(m.sum())
    row = np.repeat(np.arange(len(m)), m)
    k = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
    nb = count_b[row]
    return row, k // nb, k % nb


def _candidates_for_pulses(scan: Scan, dirs: tuple[int, ...], lo: int, hi: int):
    cnt = scan.echo_count
    off = scan.echo_offsets
    P = scan.n_pulses
    parts = []
    for di, d in enumerate(dirs):
        p = np.arange(lo, min(hi, P - d))
        if len(p) == 0:
            continue
        q = p + d
        row, ka, kb = expand_pairs(cnt[p], cnt[q])
        parts.append((p[row], q[row], off[p][row] + ka, off[q][row] + kb, np.full(len(row), di)))
    if not parts:
        return tuple(np.zeros(0, dtype=np.int64) for _ in range(5))
    p, q, i, j, di = (np.concatenate(c) for c in zip(*parts))
    order = np.lexsort((di, p))
    return p[order], q[order], i[order], j[order], di[order]


def generate_edge_candidates(scan: Scan, grid: SensorGrid, threads: int = 1) -> EdgeCandidates:
    """One candidate per echo pair of pulses ``p`` and ``p + d``, d in the forward directions.

    Pairs with coincident echo positions have no direction; they are dropped
    and counted in ``n_degenerate``.
    """
    if grid.pulse_count != scan.n_pulses:
        raise ValueError(f"grid has {grid.pulse_count} pulses, scan has {scan.n_pulses}")
    dirs = forward_directions(grid)
    chunks = map_chunks(lambda lo, hi: _candidates_for_pulses(scan, dirs, lo, hi), scan.n_pulses, threads,
                        min_chunk=2048)
    p, q, i, j, _ = (np.concatenate(c) for c in zip(*chunks))
    vec = scan.positions[j] - scan.positions[i]
    length = _norm(vec)
    ok = length > 0
    n_degenerate = int(np.count_nonzero(~ok))
    if n_degenerate:
        log.warning("dropped %d zero-length edge candidates (coincident echoes)", n_degenerate)
        p, q, i, j, vec, length = p[ok], q[ok], i[ok], j[ok], vec[ok], length[ok]
    unit = vec / length[:, None]
    return EdgeCandidates(
        p=p, q=q, i=i, j=j,
        e1=scan.echo_rank[i], e2=scan.echo_rank[j],
        length=length, unit=unit, n_degenerate=n_degenerate,
    )


# ---------------------------------------------------------------------------
# C0
# ---------------------------------------------------------------------------


def score_c0(scan: Scan, cands: EdgeCandidates) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized C0. Returns ``(c0, c0_literal)`` where ``c0_literal = 1 - e.l``."""
    cos = _dot(cands.unit, scan.direction[cands.p])
    return np.minimum(np.abs(cos), 1.0), 1.0 - cos


def _edge_vector(scan: Scan, cand: EdgeCandidate) -> np.ndarray:
    a = scan.positions[scan.echo_index(cand.p, cand.e1)]
    b = scan.positions[scan.echo_index(cand.q, cand.e2)]
    v = b - a
    n = math.sqrt(float(v @ v))
    if n == 0:
        raise DegenerateEdgeError(f"edge ({cand.p},{cand.e1})-({cand.q},{cand.e2}) has zero length")
    return v / n


def c0(scan: Scan, cand: EdgeCandidate) -> float:
    """Alignment of one edge with the beam of its lower-index pulse, in [0, 1]."""
    u = _edge_vector(scan, cand)
    beam = scan.direction[min(cand.p, cand.q)]
    return min(abs(float(u @ beam)), 1.0)


def c0_effective(c0, kappa, l_p, l_max):
    """Distance-relaxed C0: ``max(0, c0 - kappa * l_p / l_max)``.

    Accepts scalars or arrays. The relaxation grows with the echo's range, so
    raising ``kappa`` can only lower the score.
    """
    l_max = np.asarray(l_max, dtype=float)
    if np.any(l_max <= 0):
        raise ParameterError(f"l_max must be > 0, got {l_max}")
    out = np.maximum(0.0, np.asarray(c0, dtype=float) - kappa * (np.asarray(l_p, dtype=float) / l_max))
    return float(out) if out.ndim == 0 else out


def c0_weighted_literal(c0_literal, kappa, l_p, l_max):
    """Additive weighting applied to ``1 - e.l``; reported in diagnostics only."""
    return np.asarray(c0_literal, dtype=float) + kappa * (np.asarray(l_p, dtype=float) / l_max)


# ---------------------------------------------------------------------------
# C1
# ---------------------------------------------------------------------------


def _best_continuation(unit: np.ndarray, key_self: np.ndarray, key_other: np.ndarray,
                       order_other: np.ndarray, sorted_other: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """min over partners of |1 - u.u_partner| for candidates ``lo:hi``; inf where none."""
    k = key_self[lo:hi]
    start = np.searchsorted(sorted_other, k, side="left")
    stop = np.searchsorted(sorted_other, k, side="right")
    row, _, off = expand_pairs(np.ones(hi - lo, dtype=np.int64), stop - start)
    partner = order_other[start[row] + off]
    val = np.abs(1.0 - _dot(unit[lo:hi][row], unit[partner]))
    best = np.full(hi - lo, np.inf)
    np.minimum.at(best, row, val)
    return best


def score_c1(scan: Scan, grid: SensorGrid, cands: EdgeCandidates, threads: int = 1) -> np.ndarray:
    """Vectorized C1 for every candidate, in [0, 4].

    For an edge ``(p, e1) -> (p + d, e2)`` the backward factor looks at every
    edge arriving at ``(p, e1)`` from pulse ``p - d`` and the forward factor at
    every edge leaving ``(p + d, e2)`` towards pulse ``p + 2d``. Only candidate
    edges take part, so zero-length pairs are ignored. A side with no such edge
    counts as 1.
    """
    if len(cands) == 0:
        return np.zeros(0)
    dirs = forward_directions(grid)
    dir_index = np.zeros(max(dirs) + 1, dtype=np.int64)
    dir_index[list(dirs)] = np.arange(len(dirs))
    k = dir_index[cands.d]
    E = max(scan.n_echoes, 1)
    key_start = k * E + cands.i
    key_end = k * E + cands.j
    order_end = np.argsort(key_end, kind="stable")
    order_start = np.argsort(key_start, kind="stable")
    sorted_end = key_end[order_end]
    sorted_start = key_start[order_start]

    def work(lo: int, hi: int) -> np.ndarray:
        back = _best_continuation(cands.unit, key_start, key_end, order_end, sorted_end, lo, hi)
        fwd = _best_continuation(cands.unit, key_end, key_start, order_start, sorted_start, lo, hi)
        back[np.isinf(back)] = 1.0
        fwd[np.isinf(fwd)] = 1.0
        return back * fwd

    return np.concatenate(map_chunks(work, len(cands), threads))


def c1(scan: Scan, grid: SensorGrid, cand: EdgeCandidate) -> float:
    """Collinearity score of one edge against its continuations, in [0, 4]."""
    d = cand.q - cand.p
    u = _edge_vector(scan, cand)
    pos = scan.positions

    def factor(pulse: int, anchor: int, incoming: bool) -> float:
        if not 0 <= pulse < scan.n_pulses or scan.echo_count[pulse] == 0:
            return 1.0
        best = math.inf
        for e in range(scan.echo_offsets[pulse], scan.echo_offsets[pulse + 1]):
            v = pos[anchor] - pos[e] if incoming else pos[e] - pos[anchor]
            n = math.sqrt(float(v @ v))
            if n == 0:
                continue
            best = min(best, abs(1.0 - float(v @ u) / n))
        return 1.0 if math.isinf(best) else best

    a = scan.echo_index(cand.p, cand.e1)
    b = scan.echo_index(cand.q, cand.e2)
    return factor(cand.p - d, a, True) * factor(cand.q + d, b, False)


# ---------------------------------------------------------------------------
# Scoring and filtering
# ---------------------------------------------------------------------------


def score_candidates(scan: Scan, grid: SensorGrid, cands: EdgeCandidates, threads: int = 1) -> EdgeCandidates:
    """Attach ``c0``, ``c0_literal`` and ``c1`` (kappa-independent scores)."""
    c0_, lit = score_c0(scan, cands)
    return cands.with_scores(c0=c0_, c0_literal=lit, c1=score_c1(scan, grid, cands, threads))


def echo_range_of_edge(scan: Scan, cands: EdgeCandidates) -> np.ndarray:
    """Range ``l_p`` used for the relaxation: the echo on the lower-index pulse."""
    return scan.echo_range[cands.i]


def edge_mask(cands: EdgeCandidates, params: FilterParams, scan: Scan) -> tuple[np.ndarray, np.ndarray]:
    """Keep mask and ``c0_effective`` for scored candidates."""
    if cands.c0 is None or cands.c1 is None:
        raise ValueError("candidates must be scored before filtering")
    if len(cands) == 0:
        return np.zeros(0, dtype=bool), np.zeros(0)
    eff = c0_effective(cands.c0, params.kappa, echo_range_of_edge(scan, cands), scan.l_max)
    keep = (eff <= params.alpha_m) | (cands.c1 <= params.lambda_)
    if params.l_max_edge is not None:
        keep &= cands.length <= params.l_max_edge
    return keep, eff


def filter_edges(cands: EdgeCandidates, params: FilterParams, scan: Scan) -> EdgeCandidates:
    """Kept candidates, in input order, with ``c0_effective`` filled in."""
    keep, eff = edge_mask(cands, params, scan)
    return cands.with_scores(c0_effective=eff).take(keep)
