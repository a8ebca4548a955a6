"""Synthetic mobile laser scanner over parametric scenes, with per-echo ground truth.

The scan head rotates in the plane orthogonal to the heading. For pulse ``k``::

    theta_k = theta0 + 2*pi * frac(k / n_p)
    t_k     = t_start + k / (n_p * rotation_rate)
    beam    = cos(theta) * up + sin(theta) * right(heading)

so ``theta = 0`` points up and ``theta = pi/2`` to the right of the vehicle.
The origin and heading are linearly interpolated along the trajectory.

Randomness (range noise, scatter-cloud depths) comes from numpy's PCG64
generator seeded with the scene seed; all draws are made up front so the
result does not depend on how pulses are split between workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from ._parallel import map_chunks
from .errors import ConsistencyError, ParameterError
from .regularity import EdgeCandidate, _dot, _norm, generate_edge_candidates
from .scan_model import MAX_ECHOES, Scan, SensorGrid

_EPS_T = 1e-9


def _vec(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} must be three finite numbers, got {v!r}")
    return a


def _unit(v, name: str) -> np.ndarray:
    a = _vec(v, name)
    n = float(np.linalg.norm(a))
    if n == 0:
        raise ParameterError(f"{name} must be non-zero")
    return a / n


def _perp_basis(axis: np.ndarray, ref=None) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal ``(u, v)`` spanning the plane orthogonal to ``axis``; ``u`` follows ``ref``."""
    if ref is None:
        ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    ref = np.asarray(ref, dtype=float)
    u = ref - (ref @ axis) * axis
    n = float(np.linalg.norm(u))
    if n < 1e-12:
        raise ParameterError("reference direction is parallel to the axis")
    u = u / n
    return u, np.cross(axis, u)


def _positive(x: float, name: str) -> float:
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise ParameterError(f"{name} must be > 0, got {x}")
    return x


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenePrimitive:
    """Base class. ``intersect`` returns the echo distance per ray, ``inf`` on a miss."""

    id: int
    pass_through: bool = False

    kind: ClassVar[str] = ""
    is_surface: ClassVar[bool] = True
    n_random: ClassVar[int] = 0

    def intersect(self, o: np.ndarray, d: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def distance_to_surface(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "pass_through": self.pass_through, **self._params()}

    @staticmethod
    def from_dict(d: dict) -> "ScenePrimitive":
        try:
            kind = d["kind"]
            cls = _KINDS[kind]
        except KeyError:
            raise ParameterError(f"unknown or missing primitive kind: {d.get('kind')!r}") from None
        try:
            return cls._from_dict(d)
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"{kind} primitive: missing or invalid field {exc}") from None


@dataclass(frozen=True)
class PlanePatch(ScenePrimitive):
    """Rectangle ``width x height`` centered at ``center``; ``u_axis`` gives the width direction."""

    center: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    u_axis: tuple = (1.0, 0.0, 0.0)
    width: float = 1.0
    height: float = 1.0
    kind: ClassVar[str] = "plane-patch"

    def __post_init__(self) -> None:
        _positive(self.width, "width")
        _positive(self.height, "height")

    def _frame(self):
        n = _unit(self.normal, "normal")
        u, v = _perp_basis(n, self.u_axis)
        return _vec(self.center, "center"), n, u, v

    def intersect(self, o, d, u=None):
        c, n, ua, va = self._frame()
        denom = d @ n
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = ((c - o) @ n) / denom
            rel = o + t[:, None] * d - c
        ok = (denom != 0) & (t > _EPS_T) & (np.abs(rel @ ua) <= self.width / 2) & (np.abs(rel @ va) <= self.height / 2)
        return np.where(ok, t, np.inf)

    def distance_to_surface(self, x):
        c, n, _, _ = self._frame()
        return np.abs((x - c) @ n)

    def _params(self):
        return {"center": [float(x) for x in self.center], "normal": [float(x) for x in self.normal], "u_axis": [float(x) for x in self.u_axis],
                "size": [float(self.width), float(self.height)]}

    @classmethod
    def _from_dict(cls, d):
        w, h = d["size"]
        return cls(id=int(d["id"]), pass_through=bool(d.get("pass_through", False)),
                   center=tuple(_vec(d["center"], "center")), normal=tuple(_unit(d["normal"], "normal")),
                   u_axis=tuple(_vec(d.get("u_axis", _perp_basis(_unit(d["normal"], "normal"))[0]), "u_axis")),
                   width=_positive(w, "width"), height=_positive(h, "height"))


@dataclass(frozen=True)
class Box(ScenePrimitive):
    """Box of ``size`` (x, y, z) centered at ``center``, rotated by ``yaw`` radians about z."""

    center: tuple = (0.0, 0.0, 0.0)
    size: tuple = (1.0, 1.0, 1.0)
    yaw: float = 0.0
    kind: ClassVar[str] = "box"

    def __post_init__(self) -> None:
        if len(self.size) != 3:
            raise ParameterError("box size needs three values")
        for v in self.size:
            _positive(v, "size")

    def _local(self, x, is_dir=False):
        c, s = math.cos(-self.yaw), math.sin(-self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        if not is_dir:
            x = x - np.asarray(self.center)
        return x @ rot.T

    def intersect(self, o, d, u=None):
        lo_ = self._local(o)
        ld = self._local(d, is_dir=True)
        half = np.asarray(self.size) / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half - lo_) / ld
            t2 = (half - lo_) / ld
        # axis-parallel rays: inside the slab -> unbounded, outside -> empty (entry at +inf)
        inside = np.abs(lo_) <= half
        t1 = np.where(ld == 0, np.where(inside, -np.inf, np.inf), t1)
        t2 = np.where(ld == 0, np.inf, t2)
        near = np.max(np.minimum(t1, t2), axis=1)
        far = np.min(np.maximum(t1, t2), axis=1)
        t = np.where(near > _EPS_T, near, far)
        return np.where((near <= far) & (t > _EPS_T), t, np.inf)

    def distance_to_surface(self, x):
        q = np.abs(self._local(x)) - np.asarray(self.size) / 2
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return np.abs(outside + inside)

    def _params(self):
        return {"center": [float(x) for x in self.center], "size": [float(x) for x in self.size], "yaw": float(self.yaw)}

    @classmethod
    def _from_dict(cls, d):
        size = tuple(_positive(s, "size") for s in d["size"])
        if len(size) != 3:
            raise ParameterError("box size needs three values")
        return cls(id=int(d["id"]), pass_through=bool(d.get("pass_through", False)),
                   center=tuple(_vec(d["center"], "center")), size=size, yaw=float(d.get("yaw", 0.0)))


@dataclass(frozen=True)
class Cylinder(ScenePrimitive):
    """Open cylindrical surface (no caps) of ``radius`` and ``length`` along ``axis``.

    ``arc`` (degrees, optional) restricts the surface to angles measured around
    the axis from ``ref``, counter-clockwise when looking down the axis.
    """

    center: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (1.0, 0.0, 0.0)
    radius: float = 1.0
    length: float = 1.0
    arc: tuple | None = None
    ref: tuple | None = None
    kind: ClassVar[str] = "cylinder"

    def __post_init__(self) -> None:
        _positive(self.radius, "radius")
        _positive(self.length, "length")

    def _frame(self):
        a = _unit(self.axis, "axis")
        u, v = _perp_basis(a, self.ref)
        return _vec(self.center, "center"), a, u, v

    def _on_surface(self, x, c, a, u, v):
        rel = x - c
        ok = np.abs(rel @ a) <= self.length / 2
        if self.arc is not None:
            ang = np.degrees(np.arctan2(rel @ v, rel @ u))
            a0, a1 = self.arc
            ok &= np.mod(ang - a0, 360.0) <= (a1 - a0)
        return ok

    def intersect(self, o, d, u=None):
        c, a, ua, va = self._frame()
        w = o - c
        dp = d - np.outer(d @ a, a)
        wp = w - np.outer(w @ a, a)
        A = _dot(dp, dp)
        B = 2.0 * _dot(wp, dp)
        C = _dot(wp, wp) - self.radius ** 2
        disc = B * B - 4 * A * C
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(np.maximum(disc, 0.0))
            q = -0.5 * (B + np.where(B >= 0, sq, -sq))
            r1 = q / A
            r2 = C / q
        t_lo = np.fmin(r1, r2)
        t_hi = np.fmax(r1, r2)
        ok_ray = (disc >= 0) & (A > 0)
        best = np.full(len(o), np.inf)
        for t in (t_hi, t_lo):  # t_lo last so it wins when both are valid
            good = ok_ray & np.isfinite(t) & (t > _EPS_T)
            x = o + np.where(good, t, 0.0)[:, None] * d
            good &= self._on_surface(x, c, a, ua, va)
            best = np.where(good, t, best)
        return best

    def distance_to_surface(self, x):
        c, a, _, _ = self._frame()
        rel = x - c
        radial = rel - np.outer(rel @ a, a)
        return np.abs(_norm(radial) - self.radius)

    def _params(self):
        return {"center": [float(x) for x in self.center], "axis": [float(x) for x in self.axis], "radius": float(self.radius), "length": float(self.length),
                "arc": None if self.arc is None else [float(x) for x in self.arc], "ref": None if self.ref is None else [float(x) for x in self.ref]}

    @classmethod
    def _from_dict(cls, d):
        arc = d.get("arc")
        if arc is not None:
            arc = (float(arc[0]), float(arc[1]))
            if not 0 < arc[1] - arc[0] <= 360:
                raise ParameterError(f"arc must satisfy 0 < end - start <= 360, got {arc}")
        return cls(id=int(d["id"]), pass_through=bool(d.get("pass_through", cls.kind == "wire")),
                   center=tuple(_vec(d["center"], "center")), axis=tuple(_unit(d["axis"], "axis")),
                   radius=_positive(d["radius"], "radius"), length=_positive(d["length"], "length"),
                   arc=arc, ref=None if d.get("ref") is None else tuple(_vec(d["ref"], "ref")))


@dataclass(frozen=True)
class Wire(Cylinder):
    """Thin cylinder; lets the ray continue by default."""

    pass_through: bool = True
    kind: ClassVar[str] = "wire"


@dataclass(frozen=True)
class ScatterCloud(ScenePrimitive):
    """Foliage-like ball: a crossing ray returns at most one echo, with probability
    ``density``, at a uniformly random depth along its chord."""

    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    density: float = 1.0
    pass_through: bool = True
    kind: ClassVar[str] = "scatter-cloud"
    is_surface: ClassVar[bool] = False
    n_random: ClassVar[int] = 2

    def __post_init__(self) -> None:
        _positive(self.radius, "radius")
        if not 0 <= self.density <= 1:
            raise ParameterError(f"density must lie in [0, 1], got {self.density}")

    def intersect(self, o, d, u=None):
        if u is None:
            raise ValueError("scatter-cloud intersection needs random draws")
        w = o - np.asarray(self.center)
        b = _dot(w, d)
        disc = b * b - (_dot(w, w) - self.radius ** 2)
        sq = np.sqrt(np.maximum(disc, 0.0))
        t_in = np.maximum(-b - sq, 0.0)
        t_out = -b + sq
        t = t_in + u[:, 0] * (t_out - t_in)
        ok = (disc > 0) & (t_out > _EPS_T) & (u[:, 1] < self.density) & (t > _EPS_T)
        return np.where(ok, t, np.inf)

    def distance_to_surface(self, x):
        r = _norm(x - np.asarray(self.center))
        return np.maximum(r - self.radius, 0.0)

    def _params(self):
        return {"center": [float(x) for x in self.center], "radius": float(self.radius), "density": float(self.density)}

    @classmethod
    def _from_dict(cls, d):
        density = float(d.get("density", 1.0))
        if not 0 <= density <= 1:
            raise ParameterError(f"density must lie in [0, 1], got {density}")
        return cls(id=int(d["id"]), pass_through=bool(d.get("pass_through", True)),
                   center=tuple(_vec(d["center"], "center")), radius=_positive(d["radius"], "radius"),
                   density=density)


_KINDS = {k.kind: k for k in (PlanePatch, Box, Cylinder, Wire, ScatterCloud)}


# ---------------------------------------------------------------------------
# Scanner and scene
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryPoint:
    time: float
    origin: tuple[float, float, float]
    heading: float


@dataclass(frozen=True)
class ScannerConfig:
    n_p: float
    n_pulses: int
    trajectory: tuple[TrajectoryPoint, ...]
    rotation_rate: float = 10.0
    range_noise_sigma: float = 0.0
    max_range: float = 100.0
    theta0: float = 0.0

    def __post_init__(self) -> None:
        if not self.n_p > 2:
            raise ParameterError(f"n_p must be > 2, got {self.n_p}")
        if self.n_pulses < 0:
            raise ParameterError("n_pulses must be >= 0")
        if not self.rotation_rate > 0:
            raise ParameterError("rotation_rate must be > 0")
        if not self.range_noise_sigma >= 0:
            raise ParameterError("range_noise_sigma must be >= 0")
        if not self.max_range > 0:
            raise ParameterError("max_range must be > 0")
        if not self.trajectory:
            raise ParameterError("trajectory needs at least one point")
        times = [p.time for p in self.trajectory]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("trajectory times must be strictly increasing")

    @property
    def pulse_period(self) -> float:
        return 1.0 / (self.n_p * self.rotation_rate)

    def to_dict(self) -> dict:
        return {
            "n_p": self.n_p, "n_pulses": self.n_pulses, "rotation_rate": self.rotation_rate,
            "range_noise_sigma": self.range_noise_sigma, "max_range": self.max_range, "theta0": self.theta0,
            "trajectory": [
                {"time": p.time, "origin": [float(x) for x in p.origin], "heading": p.heading}
                for p in self.trajectory
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScannerConfig":
        try:
            traj = tuple(
                TrajectoryPoint(float(p["time"]), tuple(_vec(p["origin"], "origin")), float(p.get("heading", 0.0)))
                for p in d["trajectory"]
            )
            return cls(
                n_p=float(d["n_p"]), n_pulses=int(d["n_pulses"]), trajectory=traj,
                rotation_rate=float(d.get("rotation_rate", 10.0)),
                range_noise_sigma=float(d.get("range_noise_sigma", 0.0)),
                max_range=float(d.get("max_range", 100.0)), theta0=float(d.get("theta0", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"scanner: missing or invalid field {exc}") from None


@dataclass(frozen=True)
class Scene:
    primitives: tuple[ScenePrimitive, ...]
    scanner: ScannerConfig
    seed: int = 0

    def __post_init__(self) -> None:
        ids = [p.id for p in self.primitives]
        if len(set(ids)) != len(ids):
            raise ParameterError("primitive ids must be unique")
        if any(i < 0 for i in ids):
            raise ParameterError("primitive ids must be >= 0")

    def primitive(self, pid: int) -> ScenePrimitive:
        for p in self.primitives:
            if p.id == pid:
                return p
        raise KeyError(pid)


def scene_to_dict(scene: Scene) -> dict:
    return {
        "seed": scene.seed,
        "scanner": scene.scanner.to_dict(),
        "primitives": [p.to_dict() for p in scene.primitives],
    }


def scene_from_dict(d: dict) -> Scene:
    if not isinstance(d, dict):
        raise ParameterError("scene must be a JSON object")
    if "scanner" not in d:
        raise ParameterError("scene has no 'scanner' block")
    prims = d.get("primitives", [])
    if not isinstance(prims, list):
        raise ParameterError("'primitives' must be a list")
    return Scene(
        primitives=tuple(ScenePrimitive.from_dict(p) for p in prims),
        scanner=ScannerConfig.from_dict(d["scanner"]),
        seed=int(d.get("seed", 0)),
    )


def load_scene(path: str | Path) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"scene is not valid JSON: {exc}") from None
    return scene_from_dict(data)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Per-echo primitive labels, aligned with the scan's echo arrays."""

    echo_offsets: np.ndarray
    primitive_id: np.ndarray
    is_surface: np.ndarray

    def echo_index(self, pulse: int, rank: int) -> int:
        if not 0 <= pulse < len(self.echo_offsets) - 1:
            raise ConsistencyError(f"pulse {pulse} is not labeled")
        lo, hi = self.echo_offsets[pulse], self.echo_offsets[pulse + 1]
        if not 1 <= rank <= hi - lo:
            raise ConsistencyError(f"echo ({pulse}, {rank}) is not labeled")
        return int(lo + rank - 1)

    def same_surface(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """Vectorized flag over global echo indices."""
        return (self.primitive_id[i] == self.primitive_id[j]) & self.is_surface[i] & self.is_surface[j]

    def check_matches(self, scan: Scan) -> None:
        if not np.array_equal(self.echo_offsets, scan.echo_offsets):
            raise ConsistencyError("ground truth does not match the scan's pulses/echoes")
        if np.any(self.primitive_id < 0):
            raise ConsistencyError("ground truth has unlabeled echoes")


def ground_truth_same_surface(truth: GroundTruth, edge: EdgeCandidate) -> bool:
    """True iff both echoes lie on the same surface primitive.

    Scatter-cloud echoes share their cloud's id but never count as a surface.
    """
    i = truth.echo_index(edge.p, edge.e1)
    j = truth.echo_index(edge.q, edge.e2)
    if truth.primitive_id[i] < 0 or truth.primitive_id[j] < 0:
        raise ConsistencyError("edge touches an unlabeled echo")
    return bool(truth.same_surface(np.array([i]), np.array([j]))[0])


def pulse_geometry(config: ScannerConfig, k: np.ndarray | None = None):
    """Times, thetas, origins and unit beam directions of pulses ``k``."""
    if k is None:
        k = np.arange(config.n_pulses)
    k = np.asarray(k, dtype=np.int64)
    traj = config.trajectory
    t_start = traj[0].time
    time = t_start + k * config.pulse_period
    theta = np.mod(config.theta0 + 2.0 * math.pi * np.mod(k / config.n_p, 1.0), 2.0 * math.pi)
    tt = np.array([p.time for p in traj])
    oo = np.array([p.origin for p in traj], dtype=float)
    hh = np.unwrap(np.array([p.heading for p in traj], dtype=float))
    origin = np.stack([np.interp(time, tt, oo[:, c]) for c in range(3)], axis=1)
    heading = np.interp(time, tt, hh)
    right = np.stack([np.sin(heading), -np.cos(heading), np.zeros_like(heading)], axis=1)
    st, ct = np.sin(theta), np.cos(theta)
    direction = np.stack([st * right[:, 0], st * right[:, 1], ct], axis=1)
    direction /= _norm(direction)[:, None]
    return time, theta, origin, direction


def simulate_scan(scene: Scene, config: ScannerConfig | None = None, seed: int | None = None,
                  threads: int = 1) -> tuple[Scan, GroundTruth]:
    """Cast every pulse against the scene.

    Echoes are sorted by range and capped at eight. An opaque primitive stops
    the ray; pass-through ones record an echo and let it continue. Gaussian
    noise is then added to each range.
    """
    config = config or scene.scanner
    seed = scene.seed if seed is None else seed
    P = config.n_pulses
    time, theta, origin, direction = pulse_geometry(config)

    rng = np.random.default_rng(seed)
    draws = [rng.random((P, prim.n_random)) if prim.n_random else None for prim in scene.primitives]
    noise = rng.standard_normal((P, MAX_ECHOES))
    ids = np.array([p.id for p in scene.primitives], dtype=np.int64)
    opaque = np.array([not p.pass_through for p in scene.primitives], dtype=bool)
    K = len(scene.primitives)

    def cast(lo: int, hi: int):
        o, d = origin[lo:hi], direction[lo:hi]
        n = hi - lo
        if K == 0:
            return np.full((n, MAX_ECHOES), np.inf), np.full((n, MAX_ECHOES), -1)
        t = np.stack([
            prim.intersect(o, d, None if u is None else u[lo:hi])
            for prim, u in zip(scene.primitives, draws)
        ], axis=1)
        t[t > config.max_range] = np.inf
        order = np.argsort(t, axis=1, kind="stable")
        ts = np.take_along_axis(t, order, axis=1)
        hit = np.isfinite(ts)
        blocked_before = np.cumsum(opaque[order] & hit, axis=1) - (opaque[order] & hit)
        keep = hit & (blocked_before == 0)
        ts = np.where(keep, ts, np.inf)
        pid = np.where(keep, ids[order], -1)
        # kept hits are a prefix of each row
        width = min(K, MAX_ECHOES)
        out_t = np.full((n, MAX_ECHOES), np.inf)
        out_id = np.full((n, MAX_ECHOES), -1)
        out_t[:, :width] = ts[:, :width]
        out_id[:, :width] = pid[:, :width]
        return out_t, out_id

    parts = map_chunks(cast, P, threads)
    t = np.concatenate([p[0] for p in parts]) if P else np.zeros((0, MAX_ECHOES))
    pid = np.concatenate([p[1] for p in parts]) if P else np.zeros((0, MAX_ECHOES), dtype=np.int64)

    valid = np.isfinite(t)
    rng_noisy = np.where(valid, t + config.range_noise_sigma * noise, np.inf)
    if config.range_noise_sigma > 0:
        rng_noisy = np.where(valid, np.maximum(rng_noisy, _EPS_T), np.inf)
        order = np.argsort(rng_noisy, axis=1, kind="stable")
        rng_noisy = np.take_along_axis(rng_noisy, order, axis=1)
        pid = np.take_along_axis(pid, order, axis=1)
        valid = np.isfinite(rng_noisy)

    counts = valid.sum(axis=1)
    offsets = np.r_[0, np.cumsum(counts)]
    ranges = rng_noisy[valid]
    labels = pid[valid]
    surface_of = {p.id: p.is_surface for p in scene.primitives}
    is_surface = np.array([surface_of[int(x)] for x in labels], dtype=bool) if len(labels) else np.zeros(0, bool)

    scan = Scan(
        pulse_id=np.arange(P), time=time, theta=theta, origin=origin, direction=direction,
        echo_offsets=offsets, echo_range=ranges, echo_intensity=None, n_p=config.n_p,
    )
    truth = GroundTruth(echo_offsets=scan.echo_offsets, primitive_id=labels.astype(np.int64), is_surface=is_surface)
    return scan, truth


def write_ground_truth(scan: Scan, truth: GroundTruth, dest: str | Path) -> None:
    lines = ["pulse_id,echo_rank,primitive_id,is_surface"]
    pids = scan.pulse_id[scan.echo_pulse]
    for pid, rank, prim, surf in zip(pids.tolist(), scan.echo_rank.tolist(),
                                     truth.primitive_id.tolist(), truth.is_surface.tolist()):
        lines.append(f"{pid},{rank},{prim},{int(surf)}")
    Path(dest).write_text("\n".join(lines) + "\n", newline="\n")


def read_ground_truth(path: str | Path, scan: Scan) -> GroundTruth:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if len(rows) != scan.n_echoes:
        raise ConsistencyError(f"ground truth has {len(rows)} rows, scan has {scan.n_echoes} echoes")
    expect_pid = scan.pulse_id[scan.echo_pulse]
    if len(rows) and (np.any(rows[:, 0] != expect_pid) or np.any(rows[:, 1] != scan.echo_rank)):
        raise ConsistencyError("ground truth rows are not aligned with the scan's echoes")
    return GroundTruth(echo_offsets=scan.echo_offsets, primitive_id=rows[:, 2] if len(rows) else np.zeros(0, np.int64),
                       is_surface=rows[:, 3].astype(bool) if len(rows) else np.zeros(0, bool))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrecisionRecall:
    precision: float
    recall: float
    n_predicted: int
    n_true: int
    n_correct: int

    @classmethod
    def from_counts(cls, correct: int, predicted: int, true: int) -> "PrecisionRecall":
        # an empty prediction is vacuously precise; nothing to find is fully recalled
        return cls(
            precision=correct / predicted if predicted else 1.0,
            recall=correct / true if true else 1.0,
            n_predicted=predicted, n_true=true, n_correct=correct,
        )


@dataclass(frozen=True)
class Evaluation:
    edges: PrecisionRecall
    triangles: PrecisionRecall
    points: PrecisionRecall
    extra: dict[str, Any] = field(default_factory=dict)


def evaluate_reconstruction(cx, truth: GroundTruth) -> Evaluation:
    """Precision and recall of kept edges, triangles and standalone points.

    Edge recall is measured against every grid-adjacent echo pair on the same
    surface, triangle recall against every elementary grid triangle whose
    three echoes share a surface. A point is correct when its echo belongs to
    no surface (e.g. foliage).
    """
    from .complex_builder import build_triangle_candidates

    scan = cx.scan
    truth.check_matches(scan)
    grid = SensorGrid.from_scan(scan)
    all_pairs = generate_edge_candidates(scan, grid)
    true_pairs = truth.same_surface(all_pairs.i, all_pairs.j)
    kept_ok = truth.same_surface(cx.edges.i, cx.edges.j)
    edges = PrecisionRecall.from_counts(int(kept_ok.sum()), len(cx.edges), int(true_pairs.sum()))

    def tri_ok(tris) -> np.ndarray:
        return truth.same_surface(tris.a, tris.b) & truth.same_surface(tris.b, tris.c)

    all_tris = build_triangle_candidates(all_pairs.take(true_pairs), grid, scan)
    triangles = PrecisionRecall.from_counts(int(tri_ok(cx.triangles).sum()), len(cx.triangles), len(all_tris))

    non_surface = ~truth.is_surface
    pts_ok = non_surface[cx.standalone_points]
    points = PrecisionRecall.from_counts(int(pts_ok.sum()), len(cx.standalone_points), int(non_surface.sum()))
    return Evaluation(edges=edges, triangles=triangles, points=points)
