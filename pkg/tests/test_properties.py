"""Property-based checks of the structural invariants."""

import io
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import random_scan
from mlscomplex import _parallel
from mlscomplex.complex_builder import build_triangle_candidates, partition_counts, triangle_mask
from mlscomplex.pipeline import reconstruct, scored_candidates
from mlscomplex.regularity import FilterParams, c0_effective, edge_mask
from mlscomplex.scan_model import Scan, ScanConfig, SensorGrid, forward_directions, parse_scan, pulse_neighbors, write_scan
from mlscomplex.writers import ply_text

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

scans = st.builds(
    random_scan,
    seed=st.integers(0, 10_000),
    n_p=st.sampled_from([4.5, 6.0, 7.3, 10.0]),
    lines=st.integers(2, 6),
    max_echoes=st.integers(1, 4),
    p_empty=st.sampled_from([0.0, 0.1, 0.4]),
)


@SETTINGS
@given(n=st.integers(1, 30), count=st.integers(1, 400), data=st.data())
def test_neighbor_symmetry(n, count, data):
    grid = SensorGrid(n=n, pulse_count=count)
    i = data.draw(st.integers(0, count - 1))
    for j in pulse_neighbors(grid, i):
        assert i in pulse_neighbors(grid, j)
    assert len(pulse_neighbors(grid, i)) <= 6


@SETTINGS
@given(n=st.integers(2, 12), count=st.integers(1, 120))
def test_forward_directions_enumerate_each_pair_once(n, count):
    grid = SensorGrid(n=n, pulse_count=count)
    pairs = [(p, p + d) for d in forward_directions(grid) for p in range(count) if p + d < count]
    assert len(pairs) == len(set(pairs))
    undirected = {frozenset((i, j)) for i in range(count) for j in pulse_neighbors(grid, i)}
    assert undirected == {frozenset(p) for p in pairs}


@SETTINGS
@given(scan=scans)
def test_scores_are_bounded(scan):
    c = scored_candidates(scan)
    assert np.all((c.c0 >= 0) & (c.c0 <= 1))
    assert np.all((c.c1 >= 0) & (c.c1 <= 4))
    np.testing.assert_allclose(c.length, np.linalg.norm(scan.positions[c.j] - scan.positions[c.i], axis=1),
                               atol=1e-9)


@SETTINGS
@given(scan=scans, factor=st.floats(0.01, 100.0), kappa=st.floats(0.0, 1.0))
def test_scaling_leaves_scores_unchanged(scan, factor, kappa):
    scaled = Scan(scan.pulse_id, scan.time, scan.theta, scan.origin * factor, scan.direction,
                  scan.echo_offsets, scan.echo_range * factor, n_p=scan.n_p)
    a, b = scored_candidates(scan), scored_candidates(scaled)
    np.testing.assert_allclose(b.c0, a.c0, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(b.c1, a.c1, rtol=1e-7, atol=1e-9)
    ea = c0_effective(a.c0, kappa, scan.echo_range[a.i], scan.l_max)
    eb = c0_effective(b.c0, kappa, scaled.echo_range[b.i], scaled.l_max)
    np.testing.assert_allclose(eb, ea, rtol=1e-9, atol=1e-9)


@SETTINGS
@given(scan=scans, k=st.lists(st.floats(0.0, 2.0), min_size=2, max_size=2, unique=True),
       alpha=st.floats(0.0, 0.5), lam=st.floats(0.0, 0.1))
def test_kappa_monotonicity(scan, k, alpha, lam):
    k1, k2 = sorted(k)
    c = scored_candidates(scan)
    keep1, eff1 = edge_mask(c, FilterParams(alpha_m=alpha, lambda_=lam, kappa=k1), scan)
    keep2, eff2 = edge_mask(c, FilterParams(alpha_m=alpha, lambda_=lam, kappa=k2), scan)
    assert np.all(eff2 <= eff1)
    assert np.all(keep2[keep1])


@SETTINGS
@given(scan=scans)
def test_loose_triangle_filter_keeps_everything(scan):
    c = scored_candidates(scan)
    keep, _ = edge_mask(c, FilterParams(alpha_m=1.0), scan)
    tris = build_triangle_candidates(c.take(keep), SensorGrid.from_scan(scan), scan)
    assert triangle_mask(tris, FilterParams(omega=math.inf, epsilon=0.0), scan.n_echoes).all()


@SETTINGS
@given(scan=scans, alpha=st.floats(0.0, 1.0), omega=st.sampled_from([1e-3, 0.05, 1.0]),
       kappa=st.floats(0.0, 1.0))
def test_partition_and_closure(scan, alpha, omega, kappa):
    cx = reconstruct(scan, FilterParams(alpha_m=alpha, lambda_=0.01, omega=omega, kappa=kappa)).complex
    assert sum(partition_counts(cx)) == scan.n_echoes
    E = scan.n_echoes
    kept = set(cx.edges.keys(E).tolist())
    assert set(cx.triangles.edge_keys(E).ravel().tolist()) <= kept
    standalone = set(cx.standalone_edges.keys(E).tolist())
    assert standalone.isdisjoint(cx.triangles.edge_keys(E).ravel().tolist())
    tri_v = {tuple(t) for t in np.stack([cx.triangles.a, cx.triangles.b, cx.triangles.c], axis=1).tolist()}
    assert len(tri_v) == len(cx.triangles)
    header = ply_text(cx).split("end_header")[0]
    s = cx.stats()
    assert f"element face {s.n_triangles}\n" in header
    assert f"element edge {s.n_standalone_edges}\n" in header
    assert f"element vertex {E}\n" in header


@SETTINGS
@given(scan=scans, binary=st.booleans())
def test_write_parse_round_trip(scan, binary):
    buf = io.BytesIO() if binary else io.StringIO()
    write_scan(scan, buf, binary=binary)
    data = buf.getvalue() if binary else buf.getvalue().encode()
    back = parse_scan(data, ScanConfig(n_p=scan.n_p))
    assert back == scan
    assert back.l_max == (scan.echo_range.max() if scan.n_echoes else 0.0)


@settings(max_examples=15, deadline=None)
@given(scan=scans, threads=st.integers(2, 6), chunk=st.integers(1, 50))
def test_worker_count_does_not_change_results(scan, threads, chunk):
    base = reconstruct(scan, FilterParams(kappa=0.2))
    old = _parallel.MIN_CHUNK
    _parallel.MIN_CHUNK = chunk
    try:
        par = reconstruct(scan, FilterParams(kappa=0.2), threads=threads)
    finally:
        _parallel.MIN_CHUNK = old
    assert ply_text(par.complex) == ply_text(base.complex)
    for name in ("c0", "c1", "c0_effective", "length"):
        assert np.array_equal(getattr(par.candidates, name), getattr(base.candidates, name))
