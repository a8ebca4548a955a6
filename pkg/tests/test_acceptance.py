"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import time
from collections import defaultdict

import numpy as np
import pytest

import oracle
from conftest import random_scan
from mlscomplex.cli import main
from mlscomplex.pipeline import reconstruct, scored_candidates
from mlscomplex.regularity import FilterParams, edge_mask
from mlscomplex.scan_model import SensorGrid, write_scan
from mlscomplex.scenes import ACCEPTANCE_SCENES, grazing_wall_scene, scatter_scene
from mlscomplex.synth_scanner import evaluate_reconstruction, simulate_scan
from mlscomplex.writers import read_ply_header, write_complex_mesh

# Standalone-point fraction of the scatter scene with seed 0, recorded from the
# first run of the simulator and kept as a regression floor.
SCATTER_SEED0_FRACTION = 346 / 379


def report(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")


@pytest.fixture(scope="module")
def scenes():
    return {name: simulate_scan(factory()) for name, factory in ACCEPTANCE_SCENES.items()}


def interior_quads(scan, truth, pid: int) -> np.ndarray:
    """Anchor pulses of quads whose corners, and all their grid neighbors, hit primitive ``pid``."""
    n = SensorGrid.from_scan(scan).n
    P = scan.n_pulses
    hit = np.zeros(P, bool)
    hit[scan.echo_pulse[truth.primitive_id == pid]] = True
    full = hit.copy()
    for d in (1, n, n + 1):
        full[:P - d] &= hit[d:]
        full[d:] &= hit[:-d]
    full[:n + 1] = False
    full[P - n - 1:] = False
    q = np.arange(max(P - n - 1, 0))
    return q[full[q] & full[q + 1] & full[q + n] & full[q + n + 1]]


def two_triangle_fraction(cx, truth, pid: int) -> tuple[float, int]:
    quads = interior_quads(cx.scan, truth, pid)
    t = cx.triangles
    lab = truth.primitive_id
    on = (lab[t.a] == pid) & (lab[t.b] == pid) & (lab[t.c] == pid)
    per_quad = np.bincount(t.quad[on], minlength=cx.scan.n_pulses)
    return float(np.mean(per_quad[quads] == 2)) if len(quads) else 0.0, len(quads)


def components(edges_i, edges_j, nodes) -> list[set]:
    adj = defaultdict(set)
    for a, b in zip(edges_i.tolist(), edges_j.tolist()):
        adj[a].add(b)
        adj[b].add(a)
    seen, out = set(), []
    for start in nodes:
        if start in seen:
            continue
        comp, stack = set(), [start]
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(adj[v] - comp)
        seen |= comp
        out.append(comp)
    return out


def test_criterion_1_orthogonal_wall(scenes, capsys):
    scan, truth = scenes["orthogonal_wall"]
    t0 = time.perf_counter()
    r = reconstruct(scan, FilterParams())
    elapsed = time.perf_counter() - t0
    frac, n_quads = two_triangle_fraction(r.complex, truth, 1)
    ev = evaluate_reconstruction(r.complex, truth)
    points = r.complex.stats().n_standalone_points
    ok = frac >= 0.99 and points == 0 and ev.edges.precision == 1.0 and elapsed < 1.0
    report(capsys, 1, "orthogonal wall", ok,
           f"two-triangle quads {frac:.4f} of {n_quads}, points {points}, "
           f"edge precision {ev.edges.precision}, reconstruct {elapsed * 1e3:.0f} ms")
    assert ok


def test_criterion_2_grazing_wall(scenes, capsys):
    scan, _ = scenes["grazing_wall"]
    inc = np.degrees(np.arccos(np.abs(scan.direction[scan.echo_pulse] @ np.array([0.0, 1.0, 0.0]))))
    cands = scored_candidates(scan)
    kept, tris, pts = {}, [], []
    for kappa in (0.0, 0.1, 0.2, 0.3):
        r = reconstruct(scan, FilterParams(kappa=kappa), candidates=cands)
        kept[kappa] = set(r.complex.edges.keys(scan.n_echoes).tolist())
        tris.append(r.complex.stats().n_triangles)
        pts.append(r.complex.stats().n_standalone_points)
    strict = kept[0.0] < kept[0.3]
    non_decreasing = all(a <= b for a, b in zip(tris, tris[1:]))
    ok = bool(inc.min() >= 85.0) and strict and non_decreasing
    report(capsys, 2, "grazing wall", ok,
           f"min incidence {inc.min():.2f} deg, edges {len(kept[0.0])} -> {len(kept[0.3])} "
           f"(strict subset {strict}), triangles {tris}, points {pts}")
    assert ok


def test_criterion_3_wire(scenes, capsys):
    scan, truth = scenes["wire"]
    cx = reconstruct(scan, FilterParams()).complex
    wire = np.flatnonzero(truth.primitive_id == 2)
    se = cx.standalone_edges
    both = np.isin(se.i, wire) & np.isin(se.j, wire)
    comps = components(se.i[both], se.j[both], wire.tolist())
    largest = max((len(c) for c in comps), default=0)
    coverage = largest / len(wire) if len(wire) else 0.0
    t = cx.triangles
    wire_tris = int(np.sum(np.isin(t.a, wire) | np.isin(t.b, wire) | np.isin(t.c, wire)))
    wall_frac, n_quads = two_triangle_fraction(cx, truth, 1)
    ok = len(wire) > 0 and coverage >= 0.90 and wire_tris == 0 and wall_frac >= 0.95
    report(capsys, 3, "wire", ok,
           f"{len(wire)} wire echoes, largest standalone-edge chain covers {coverage:.4f}, "
           f"wire triangles {wire_tris}, wall two-triangle quads {wall_frac:.4f} of {n_quads}")
    assert ok


def test_criterion_4_scatter(scenes, capsys):
    scan, truth = scenes["scatter"]
    assert scenes["scatter"][0] == simulate_scan(scatter_scene(seed=0))[0]
    cx = reconstruct(scan, FilterParams()).complex
    frac = len(cx.standalone_points) / scan.n_echoes
    ok = frac >= 0.80 and frac >= SCATTER_SEED0_FRACTION - 1e-12
    report(capsys, 4, "scatter", ok,
           f"standalone points {len(cx.standalone_points)}/{scan.n_echoes} = {frac:.4f} "
           f"(threshold 0.80, seed-0 floor {SCATTER_SEED0_FRACTION:.4f})")
    assert ok


def test_criterion_5_depth_discontinuity(scenes, capsys):
    scan, truth = scenes["depth_discontinuity"]
    lab = truth.primitive_id

    def cross(params):
        e = reconstruct(scan, params).complex.edges
        return int(np.sum(lab[e.i] != lab[e.j]))

    limited = cross(FilterParams(l_max_edge=1.0))
    limited_relaxed = cross(FilterParams(l_max_edge=1.0, kappa=0.5))
    unlimited = cross(FilterParams(kappa=0.5))
    # with every edge accepted by C0 only the length threshold separates the walls
    loose_limited = cross(FilterParams(alpha_m=1.0, l_max_edge=1.0))
    loose_unlimited = cross(FilterParams(alpha_m=1.0))
    ok = limited == 0 and limited_relaxed == 0 and loose_limited == 0
    report(capsys, 5, "depth discontinuity", ok,
           f"cross-surface edges with max-edge-len 1: {limited} (kappa 0.5: {limited_relaxed}, "
           f"alpha_m 1: {loose_limited}); without threshold: {unlimited} at kappa 0.5, "
           f"{loose_unlimited} at alpha_m 1")
    assert ok


def test_criterion_6_oracle_equivalence(capsys):
    scan = random_scan(2024, n_p=10.0, lines=10)
    kappa = 0.35
    c = scored_candidates(scan)
    _, eff = edge_mask(c, FilterParams(kappa=kappa), scan)
    o = oracle.OracleScan(scan)
    expected = oracle.candidates(o)
    got = list(zip(c.p.tolist(), c.e1.tolist(), c.q.tolist(), c.e2.tolist()))
    same_set = sorted(got) == sorted(expected)

    def rel(a, b):
        return 0.0 if a == b else abs(a - b) / max(abs(a), abs(b))

    worst = {"c0": 0.0, "c1": 0.0, "c0_effective": 0.0}
    for k, (p, e1, q, e2) in enumerate(got):
        worst["c0"] = max(worst["c0"], rel(float(c.c0[k]), oracle.c0(o, p, e1, q, e2)))
        worst["c1"] = max(worst["c1"], rel(float(c.c1[k]), oracle.c1(o, p, e1, q, e2)))
        worst["c0_effective"] = max(worst["c0_effective"],
                                    rel(float(eff[k]), oracle.c0_effective(o, p, e1, q, e2, kappa)))
    ok = same_set and len(got) > 0 and all(v <= 1e-12 for v in worst.values())
    report(capsys, 6, "oracle equivalence", ok,
           f"{len(got)} candidates (same set {same_set}), worst relative error "
           + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))
    assert ok


@pytest.fixture(scope="module")
def scan_files(scenes, tmp_path_factory):
    root = tmp_path_factory.mktemp("scans")
    paths = {}
    for name, (scan, _) in scenes.items():
        paths[name] = root / f"{name}.scan.csv"
        write_scan(scan, paths[name])
    return paths


def test_criterion_7_thread_determinism(scan_files, tmp_path, capsys):
    mismatched = []
    for name, path in scan_files.items():
        outputs = []
        for threads in (1, 8):
            prefix = tmp_path / f"{name}-t{threads}"
            diag = tmp_path / f"{name}-t{threads}.diag.csv"
            code = main(["reconstruct", str(path), "-o", str(prefix), "--threads", str(threads),
                         "--diagnostics", str(diag)])
            assert code == 0
            outputs.append([p.read_bytes() for p in (prefix.with_suffix(".ply"),
                                                     tmp_path / f"{prefix.name}.stats.json", diag)])
        if outputs[0] != outputs[1]:
            mismatched.append(name)
    ok = not mismatched
    report(capsys, 7, "thread determinism", ok,
           f"{len(scan_files)} scenes, mesh/stats/diagnostics identical for threads 1 vs 8"
           + (f"; mismatches: {mismatched}" if mismatched else ""))
    assert ok


def test_criterion_8_structural_invariants(scenes, tmp_path, capsys):
    failures = []
    for name, (scan, _) in scenes.items():
        cx = reconstruct(scan, FilterParams()).complex
        E = scan.n_echoes
        dims = np.bincount(cx.echo_dim, minlength=3)
        if int(dims.sum()) != E:
            failures.append(f"{name}: partition {dims.tolist()} != {E}")
        kept = np.sort(cx.edges.keys(E))
        tri_edges = cx.triangles.edge_keys(E).ravel()
        if not np.all(np.isin(tri_edges, kept)):
            failures.append(f"{name}: triangle edge outside kept set")
        path = tmp_path / f"{name}.ply"
        write_complex_mesh(cx, path)
        header = read_ply_header(path)
        s = cx.stats()
        if header != {"vertex": E, "edge": s.n_standalone_edges, "face": s.n_triangles}:
            failures.append(f"{name}: header {header} vs stats {s}")
    ok = not failures
    report(capsys, 8, "structural invariants", ok,
           f"{len(scenes)} scenes checked" + (f"; {failures}" if failures else ""))
    assert ok


def test_criterion_9_kappa_monotonicity(capsys):
    rng = np.random.default_rng(9)
    violations = []
    for seed in range(50):
        scan = random_scan(seed, n_p=float(rng.choice([5.5, 8.0, 10.0])), lines=int(rng.integers(3, 8)))
        k1, k2 = np.sort(rng.uniform(0.0, 1.0, 2))
        params = dict(alpha_m=float(rng.uniform(0.0, 0.3)), lambda_=float(rng.uniform(0.0, 0.05)))
        cands = scored_candidates(scan)
        e1 = reconstruct(scan, FilterParams(kappa=float(k1), **params), candidates=cands).complex.edges
        e2 = reconstruct(scan, FilterParams(kappa=float(k2), **params), candidates=cands).complex.edges
        if not set(e1.keys(scan.n_echoes).tolist()) <= set(e2.keys(scan.n_echoes).tolist()):
            violations.append(seed)
    ok = not violations
    report(capsys, 9, "kappa monotonicity", ok,
           "50 seeded scans, nested kept-edge sets" + (f"; violations at seeds {violations}" if violations else ""))
    assert ok


def test_acceptance_scenes_are_reproducible():
    a, _ = simulate_scan(grazing_wall_scene(lines=10))
    b, _ = simulate_scan(grazing_wall_scene(lines=10))
    assert a == b and not math.isnan(a.n_p)
