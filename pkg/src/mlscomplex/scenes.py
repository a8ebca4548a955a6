"""Ready-made test scenes for the synthetic scanner.

All scenes drive along +x at constant speed with the scan head turning at
10 Hz, so line ``m`` of a scan is rotation ``m``. Angles are in degrees and
follow the scanner convention: 0 is straight up, 90 points to the right
(towards -y).
"""

from __future__ import annotations

import math

from .synth_scanner import (
    Cylinder,
    PlanePatch,
    ScannerConfig,
    ScatterCloud,
    Scene,
    TrajectoryPoint,
    Wire,
)

RATE = 10.0


def straight_scanner(n_p: float, lines: int, line_spacing: float, sigma: float = 0.0,
                     max_range: float = 100.0, theta0: float = 0.0) -> ScannerConfig:
    speed = line_spacing * RATE
    duration = lines / RATE
    traj = (
        TrajectoryPoint(0.0, (0.0, 0.0, 0.0), 0.0),
        TrajectoryPoint(duration, (speed * duration, 0.0, 0.0), 0.0),
    )
    return ScannerConfig(
        n_p=n_p, n_pulses=int(round(n_p * lines)), trajectory=traj, rotation_rate=RATE,
        range_noise_sigma=sigma, max_range=max_range, theta0=theta0,
    )


def _track_length(cfg: ScannerConfig) -> float:
    return cfg.trajectory[-1].origin[0] - cfg.trajectory[0].origin[0]


def side_wall(pid: int, cfg: ScannerConfig, distance: float, theta_lo: float, theta_hi: float,
              margin: float = 10.0) -> PlanePatch:
    """Vertical wall parallel to the track at ``distance`` to the right.

    It spans the beams with ``theta_lo <= theta <= theta_hi`` (degrees, both in
    ``(0, 180)``), i.e. heights ``distance * cot(theta)``.
    """
    z_top = distance / math.tan(math.radians(theta_lo))
    z_bot = distance / math.tan(math.radians(theta_hi))
    length = _track_length(cfg)
    return PlanePatch(
        id=pid, center=(length / 2, -distance, (z_top + z_bot) / 2), normal=(0.0, 1.0, 0.0),
        u_axis=(1.0, 0.0, 0.0), width=length + 2 * margin, height=z_top - z_bot,
    )


def _pulse_window(n_p: float, first: int, count: int) -> tuple[float, float]:
    """Theta bounds (degrees) enclosing pulses ``first .. first+count-1`` of a line, with half-step slack."""
    step = 360.0 / n_p
    return (first - 0.5) * step, (first + count - 0.5) * step


def coaxial_wall_scene(radius: float = 10.0, n_p: float = 10.0, lines: int = 10, sigma: float = 0.0,
                       seed: int = 0) -> Scene:
    """Cylindrical wall around the track axis: every beam meets it at normal incidence."""
    cfg = straight_scanner(n_p, lines, line_spacing=0.5, sigma=sigma, max_range=2 * radius)
    length = _track_length(cfg)
    wall = Cylinder(id=1, center=(length / 2, 0.0, 0.0), axis=(1.0, 0.0, 0.0), radius=radius, length=length + 10)
    return Scene((wall,), cfg, seed)


def orthogonal_wall_scene(sigma: float = 0.001, seed: int = 0, lines: int = 100, hits: int = 100,
                          distance: float = 10.0, n_p: float = 360.0) -> Scene:
    """Flat wall ``distance`` m to the right, orthogonal to the horizontal beam.

    ``hits`` consecutive pulses of each line, centered on the horizontal beam,
    land on the wall; the line spacing matches the in-line spacing there.
    """
    spacing = distance * math.radians(360.0 / n_p)
    cfg = straight_scanner(n_p, lines, spacing, sigma, max_range=60.0)
    first = int(round(90.0 / (360.0 / n_p))) - hits // 2
    lo, hi = _pulse_window(n_p, first, hits)
    return Scene((side_wall(1, cfg, distance, lo, hi),), cfg, seed)


def grazing_wall_scene(sigma: float = 0.03, seed: int = 0, lines: int = 60, distance: float = 1.0,
                       n_p: float = 3600.0, line_spacing: float = 0.5,
                       theta_lo: float = 1.0, theta_hi: float = 5.0) -> Scene:
    """Facade 1 m beside the track, seen only by near-vertical beams.

    With the default angles every echo has an incidence between 85 and 89
    degrees, and ranges run from about 11 m to 57 m.
    """
    cfg = straight_scanner(n_p, lines, line_spacing, sigma, max_range=200.0)
    return Scene((side_wall(1, cfg, distance, theta_lo, theta_hi),), cfg, seed)


def wire_scene(sigma: float = 0.001, seed: int = 0, lines: int = 100, wire_range: float = 10.0,
               wire_radius: float = 0.0025, wall_distance: float = 15.0, n_p: float = 360.0) -> Scene:
    """5 mm wire parallel to the track, in front of a wall.

    The wire lies on the horizontal beam (theta = 90 degrees), which with an
    integer ``n_p`` is fired once per line, so every line records it.
    """
    step = 360.0 / n_p
    spacing = wall_distance * math.radians(step)
    cfg = straight_scanner(n_p, lines, spacing, sigma, max_range=60.0)
    first = int(round(90.0 / step)) - 50
    lo, hi = _pulse_window(n_p, first, 100)
    length = _track_length(cfg)
    wire = Wire(id=2, center=(length / 2, -wire_range, 0.0), axis=(1.0, 0.0, 0.0), radius=wire_radius,
                length=length + 20)
    return Scene((side_wall(1, cfg, wall_distance, lo, hi), wire), cfg, seed)


def scatter_scene(sigma: float = 0.001, seed: int = 0, lines: int = 60, n_p: float = 360.0,
                  radius: float = 3.0, distance: float = 10.0, density: float = 0.4) -> Scene:
    """A foliage-like ball 10 m to the right with nothing behind it."""
    spacing = distance * math.radians(360.0 / n_p)
    cfg = straight_scanner(n_p, lines, spacing, sigma, max_range=60.0)
    length = _track_length(cfg)
    cloud = ScatterCloud(id=3, center=(length / 2, -distance, 0.0), radius=radius, density=density)
    return Scene((cloud,), cfg, seed)


def depth_discontinuity_scene(sigma: float = 0.001, seed: int = 0, lines: int = 60,
                              n_p: float = 360.0) -> Scene:
    """A narrow wall at 10 m partly hiding a wide wall at 15 m."""
    spacing = 10.0 * math.radians(360.0 / n_p)
    cfg = straight_scanner(n_p, lines, spacing, sigma, max_range=60.0)
    step = 360.0 / n_p
    lo_b, hi_b = _pulse_window(n_p, int(round(40 / step)), int(round(100 / step)))
    lo_f, hi_f = _pulse_window(n_p, int(round(70 / step)), int(round(40 / step)))
    back = side_wall(1, cfg, 15.0, lo_b, hi_b)
    front = side_wall(2, cfg, 10.0, lo_f, hi_f)
    return Scene((back, front), cfg, seed)


ACCEPTANCE_SCENES = {
    "orthogonal_wall": orthogonal_wall_scene,
    "grazing_wall": grazing_wall_scene,
    "wire": wire_scene,
    "scatter": scatter_scene,
    "depth_discontinuity": depth_discontinuity_scene,
}
