"""Command-line interface: ``mlscomplex reconstruct | simulate | sweep``.

Exit codes
----------
0  success
2  the input scan or scene could not be read or parsed
3  invalid parameters, scene description or N_p configuration
4  an output file could not be written
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParameterError, ScanParseError
from .pipeline import Reconstruction, reconstruct, scored_candidates
from .regularity import PRESETS, FilterParams
from .scan_model import Scan, ScanConfig, parse_scan, write_scan
from .synth_scanner import load_scene, simulate_scan, write_ground_truth
from .writers import (
    RunManifest,
    fmt,
    sweep_csv,
    write_complex_mesh,
    write_complex_obj,
    write_diagnostics,
    write_stats_json,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PARAMS = 3
EXIT_WRITE = 4

log = logging.getLogger("mlscomplex")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _filter_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("filter parameters (override the preset)")
    g.add_argument("--preset", choices=sorted(PRESETS), default="default",
                   help="base parameter set (default: %(default)s)")
    g.add_argument("--alpha-m", type=float, help="C0 acceptance threshold (default 0.05)")
    g.add_argument("--lambda", dest="lambda_", type=float, help="C1 acceptance threshold (default 1e-3)")
    g.add_argument("--omega", type=float, help="triangle planarity threshold (default 1e-3)")
    g.add_argument("--epsilon", type=float, help="triangle degeneracy tolerance (default 5e-3)")
    g.add_argument("--kappa", type=float, help="distance relaxation weight (default 0)")
    g.add_argument("--max-edge-len", type=float, help="maximum edge length in meters (default: none)")
    p.add_argument("--np", dest="n_p", type=float, help="pulses per rotation; overrides the theta estimate")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output is identical for any value)")


def _params_from_args(args: argparse.Namespace) -> FilterParams:
    base = PRESETS[args.preset].to_dict()
    overrides = {"alpha_m": args.alpha_m, "lambda": args.lambda_, "omega": args.omega,
                 "epsilon": args.epsilon, "kappa": getattr(args, "kappa", None),
                 "max_edge_len": args.max_edge_len}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return FilterParams.from_dict(base)


def _check_threads(threads: int) -> None:
    if threads < 1:
        raise ParameterError(f"--threads must be >= 1, got {threads}")


def _load_scan(path: str, n_p: float | None) -> Scan:
    if not Path(path).is_file():
        raise CliError(EXIT_PARSE, f"cannot read scan '{path}': no such file")
    try:
        return parse_scan(path, ScanConfig(n_p=n_p))
    except ScanParseError as exc:
        raise CliError(EXIT_PARSE, f"cannot parse scan '{path}': {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read scan '{path}': {exc}") from None


def _write(fn, *args) -> None:
    try:
        fn(*args)
    except OSError as exc:
        raise CliError(EXIT_WRITE, f"cannot write output: {exc}") from None


def _manifest(command: str, inputs: list[str], params: dict, scan_n_p: float, override: float | None,
              threads: int, outputs: list[str], options: dict, timings: dict) -> RunManifest:
    return RunManifest(
        command=command,
        inputs=[{"path": p, "sha256": _sha256(p)} for p in inputs],
        params=params,
        n_p=float(scan_n_p),
        n_p_source="override" if override is not None else "estimated",
        version=__version__,
        threads=threads,
        outputs=outputs,
        options=options,
        timings_ms={k: round(v, 3) for k, v in timings.items()},
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_reconstruct(args: argparse.Namespace) -> int:
    params = _params_from_args(args)
    _check_threads(args.threads)
    scan = _load_scan(args.scan, args.n_p)
    result: Reconstruction = reconstruct(scan, params, threads=args.threads)
    cx = result.complex
    prefix = args.output
    mesh, stats = f"{prefix}.ply", f"{prefix}.stats.json"
    outputs = [mesh, stats]
    _write(write_complex_mesh, cx, mesh, args.color)
    _write(write_stats_json, cx.stats(), params, scan.n_p, stats)
    if args.obj:
        outputs.append(f"{prefix}.obj")
        _write(write_complex_obj, cx, outputs[-1])
    if args.diagnostics:
        outputs.append(args.diagnostics)
        _write(write_diagnostics, scan, result.candidates, result.kept_mask, params.kappa, args.diagnostics)
    manifest = f"{prefix}.manifest.json"
    outputs.append(manifest)
    m = _manifest("reconstruct", [args.scan], params.to_dict(), scan.n_p, args.n_p, args.threads, outputs,
                  {"color": args.color, "obj": args.obj, "diagnostics": args.diagnostics}, result.timings_ms)
    _write(m.write, manifest)
    s = cx.stats()
    print(f"triangles={s.n_triangles} edges={s.n_standalone_edges} points={s.n_standalone_points}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if not Path(args.scene).is_file():
        raise CliError(EXIT_PARSE, f"cannot read scene '{args.scene}': no such file")
    _check_threads(args.threads)
    scene = load_scene(args.scene)
    scan, truth = simulate_scan(scene, seed=args.seed, threads=args.threads)
    prefix = args.output
    scan_path = f"{prefix}.scan.bin" if args.binary else f"{prefix}.scan.csv"
    truth_path = f"{prefix}.truth.csv"
    _write(write_scan, scan, scan_path, args.binary)
    _write(write_ground_truth, scan, truth, truth_path)
    manifest = f"{prefix}.manifest.json"
    seed = scene.seed if args.seed is None else args.seed
    m = _manifest("simulate", [args.scene], {}, scene.scanner.n_p, scene.scanner.n_p, args.threads,
                  [scan_path, truth_path, manifest], {"seed": seed, "binary": args.binary}, {})
    _write(m.write, manifest)
    print(f"pulses={scan.n_pulses} echoes={scan.n_echoes}")
    return EXIT_OK


def sweep_rows(scan: Scan, kappas: list[float], params: FilterParams, threads: int = 1):
    """Reconstruct once per kappa (ascending), reusing the kappa-independent scores.

    Returns the stats rows and the kept-edge key sets, both in ascending kappa order.
    """
    cands = scored_candidates(scan, threads=threads)
    rows, kept_sets = [], []
    for k in sorted(kappas):
        r = reconstruct(scan, FilterParams.from_dict({**params.to_dict(), "kappa": k}), threads, candidates=cands)
        s = r.complex.stats()
        rows.append({"kappa": k, "triangles": s.n_triangles, "edges": s.n_standalone_edges,
                     "points": s.n_standalone_points, "kept_edges": len(r.kept_edges)})
        kept_sets.append(np.sort(r.kept_edges.keys(scan.n_echoes)))
    return rows, kept_sets


def monotonicity_summary(rows: list[dict], kept_sets: list[np.ndarray]) -> dict:
    tri = [r["triangles"] for r in rows]
    pts = [r["points"] for r in rows]
    nested = all(np.isin(a, b).all() for a, b in zip(kept_sets, kept_sets[1:]))
    return {
        "kappas": [r["kappa"] for r in rows],
        "kept_edges_nested": bool(nested),
        "triangles_non_decreasing": all(a <= b for a, b in zip(tri, tri[1:])),
        "points_non_increasing": all(a >= b for a, b in zip(pts, pts[1:])),
    }


def cmd_sweep(args: argparse.Namespace) -> int:
    if not args.kappas:
        raise ParameterError("--kappas needs at least one value")
    params = _params_from_args(args)
    _check_threads(args.threads)
    for k in args.kappas:
        FilterParams.from_dict({**params.to_dict(), "kappa": k})      # validate every kappa up front
    scan = _load_scan(args.scan, args.n_p)
    rows, kept_sets = sweep_rows(scan, args.kappas, params, args.threads)
    summary = monotonicity_summary(rows, kept_sets)
    _write(Path(args.output).write_text, sweep_csv(rows))
    manifest = f"{args.output}.manifest.json"
    base = {**params.to_dict(), "kappa": None}
    m = _manifest("sweep", [args.scan], base, scan.n_p, args.n_p, args.threads, [args.output, manifest],
                  {"kappas": sorted(args.kappas), "summary": summary}, {})
    _write(m.write, manifest)
    for r in rows:
        print(f"kappa={fmt(r['kappa'])} triangles={r['triangles']} edges={r['edges']} points={r['points']}")
    print("monotonicity: " + " ".join(f"{k}={v}" for k, v in summary.items() if k != "kappas"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlscomplex", description=__doc__.split("\n")[0],
                                     epilog="exit codes: 2 read/parse error, 3 parameter error, 4 write error")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="build the simplicial complex of a scan")
    rec.add_argument("scan", help="scan file (text or binary)")
    rec.add_argument("-o", "--output", required=True, help="output prefix for .ply/.stats.json/.manifest.json")
    _filter_args(rec)
    rec.add_argument("--color", action=argparse.BooleanOptionalAction, default=True,
                     help="write red/green/black class colors in the mesh")
    rec.add_argument("--obj", action="store_true", help="also write a lossy OBJ mesh")
    rec.add_argument("--diagnostics", metavar="PATH", help="write per-candidate scores to PATH")
    rec.set_defaults(func=cmd_reconstruct)

    sim = sub.add_parser("simulate", help="simulate a scan from a JSON scene")
    sim.add_argument("scene", help="scene description (JSON)")
    sim.add_argument("-o", "--output", required=True, help="output prefix for .scan.csv/.truth.csv")
    sim.add_argument("--seed", type=int, help="override the scene's seed")
    sim.add_argument("--binary", action="store_true", help="write the binary scan variant")
    sim.add_argument("--threads", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="complex statistics for several kappa values")
    sw.add_argument("scan")
    sw.add_argument("--kappas", type=float, nargs="+", required=True)
    sw.add_argument("-o", "--output", required=True, help="CSV table path")
    _filter_args(sw)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mlscomplex: error: {exc}", file=sys.stderr)
        return exc.code
    except ParameterError as exc:
        print(f"mlscomplex: error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
