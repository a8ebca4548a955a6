"""Brute-force reference implementation, written with plain Python loops and ``math``.

It shares no code with the package beyond reading the raw scan columns, and
recomputes echo positions itself. Use it only on small scans.
"""

from __future__ import annotations

import math


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _norm(a):
    return math.sqrt(_dot(a, a))


class OracleScan:
    """Pulse-major nested lists: ``echoes[p]`` is a list of (range, position)."""

    def __init__(self, scan, n=None):
        self.n_pulses = int(scan.n_pulses)
        off = [int(x) for x in scan.echo_offsets]
        rng = [float(x) for x in scan.echo_range]
        self.direction = [tuple(float(v) for v in scan.direction[k]) for k in range(self.n_pulses)]
        self.origin = [tuple(float(v) for v in scan.origin[k]) for k in range(self.n_pulses)]
        self.echoes = []
        for k in range(self.n_pulses):
            o, d = self.origin[k], self.direction[k]
            self.echoes.append([
                (rng[j], (o[0] + rng[j] * d[0], o[1] + rng[j] * d[1], o[2] + rng[j] * d[2]))
                for j in range(off[k], off[k + 1])
            ])
        self.l_max = max((r for es in self.echoes for r, _ in es), default=0.0)
        self.n = int(math.floor(scan.n_p)) if n is None else n
        if abs(scan.n_p - round(scan.n_p)) <= 1e-9 * max(1.0, abs(scan.n_p)) and n is None:
            self.n = int(round(scan.n_p))

    def neighbors(self, i):
        out = set()
        for d in (1, self.n, self.n + 1):
            for j in (i - d, i + d):
                if 0 <= j < self.n_pulses and j != i:
                    out.add(j)
        return out

    def directions(self):
        return (1, 2) if self.n == 1 else (1, self.n, self.n + 1)

    def pos(self, p, e):
        """Position of echo rank ``e`` (1-based) of pulse ``p``."""
        return self.echoes[p][e - 1][1]


def candidates(o: OracleScan):
    """(p, e1, q, e2) for every non-degenerate echo pair of forward neighbors."""
    out = []
    for p in range(o.n_pulses):
        for d in o.directions():
            q = p + d
            if q >= o.n_pulses:
                continue
            for e1 in range(1, len(o.echoes[p]) + 1):
                for e2 in range(1, len(o.echoes[q]) + 1):
                    if _norm(_sub(o.pos(q, e2), o.pos(p, e1))) > 0:
                        out.append((p, e1, q, e2))
    return out


def _unit_edge(o, p, e1, q, e2):
    v = _sub(o.pos(q, e2), o.pos(p, e1))
    n = _norm(v)
    return (v[0] / n, v[1] / n, v[2] / n)


def c0(o: OracleScan, p, e1, q, e2):
    u = _unit_edge(o, p, e1, q, e2)
    return min(1.0, abs(_dot(u, o.direction[p])))


def c1(o: OracleScan, p, e1, q, e2):
    d = q - p
    u = _unit_edge(o, p, e1, q, e2)
    back = 1.0
    if p - d >= 0:
        vals = []
        for e in range(1, len(o.echoes[p - d]) + 1):
            v = _sub(o.pos(p, e1), o.pos(p - d, e))
            if _norm(v) > 0:
                vals.append(abs(1.0 - _dot(_unit_edge(o, p - d, e, p, e1), u)))
        if vals:
            back = min(vals)
    fwd = 1.0
    if q + d < o.n_pulses:
        vals = []
        for e in range(1, len(o.echoes[q + d]) + 1):
            v = _sub(o.pos(q + d, e), o.pos(q, e2))
            if _norm(v) > 0:
                vals.append(abs(1.0 - _dot(u, _unit_edge(o, q, e2, q + d, e))))
        if vals:
            fwd = min(vals)
    return back * fwd


def c0_effective(o: OracleScan, p, e1, q, e2, kappa):
    l_p = o.echoes[p][e1 - 1][0]
    return max(0.0, c0(o, p, e1, q, e2) - kappa * l_p / o.l_max)


def kept_edges(o: OracleScan, alpha_m, lambda_, kappa, max_len=None):
    kept = set()
    for p, e1, q, e2 in candidates(o):
        length = _norm(_sub(o.pos(q, e2), o.pos(p, e1)))
        if max_len is not None and length > max_len:
            continue
        if c0_effective(o, p, e1, q, e2, kappa) <= alpha_m or c1(o, p, e1, q, e2) <= lambda_:
            kept.add(((p, e1), (q, e2)))
    return kept


def _has(kept, a, b):
    return (a, b) in kept or (b, a) in kept


def triangle_candidates(o: OracleScan, kept):
    """Elementary triangles (each a sorted triple of (pulse, rank)) with all three edges kept."""
    tris = []
    mids = (1,) if o.n == 1 else (1, o.n)
    diag = o.directions()[-1]
    for i in range(o.n_pulses - diag):
        for m in mids:
            for ea in range(1, len(o.echoes[i]) + 1):
                for eb in range(1, len(o.echoes[i + m]) + 1):
                    for ec in range(1, len(o.echoes[i + diag]) + 1):
                        a, b, c = (i, ea), (i + m, eb), (i + diag, ec)
                        if _has(kept, a, b) and _has(kept, b, c) and _has(kept, a, c):
                            tris.append((a, b, c))
    return tris


def sin_min_angle(pa, pb, pc):
    area2 = _norm(_cross(_sub(pb, pa), _sub(pc, pa)))
    if area2 == 0:
        return 0.0
    s = sorted((_norm(_sub(pb, pa)), _norm(_sub(pc, pb)), _norm(_sub(pc, pa))))
    return min(1.0, area2 / (s[1] * s[2]))


def _normal(pa, pb, pc):
    cr = _cross(_sub(pb, pa), _sub(pc, pa))
    n = _norm(cr)
    if n == 0:
        return None
    return (cr[0] / n, cr[1] / n, cr[2] / n)


def kept_triangles(o: OracleScan, kept, omega, epsilon):
    tris = triangle_candidates(o, kept)
    geo = [tuple(o.pos(*v) for v in t) for t in tris]
    normals = [_normal(*g) for g in geo]
    edges = [{frozenset(pair) for pair in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2]))} for t in tris]
    out = []
    for k, t in enumerate(tris):
        if sin_min_angle(*geo[k]) < epsilon:
            continue
        worst = 0.0
        for m in range(len(tris)):
            if m == k or not edges[k] & edges[m] or normals[k] is None or normals[m] is None:
                continue
            worst = max(worst, 1.0 - abs(_dot(normals[k], normals[m])))
        if worst <= omega:
            out.append(t)
    return out


def classify(o: OracleScan, kept, tris):
    """(standalone points, standalone edges, triangles) counts of the complex."""
    tri_edges = {frozenset(pair) for t in tris for pair in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2]))}
    standalone = [e for e in kept if frozenset(e) not in tri_edges]
    touched = {v for e in kept for v in e}
    n_echoes = sum(len(es) for es in o.echoes)
    return n_echoes - len(touched), len(standalone), len(tris)
