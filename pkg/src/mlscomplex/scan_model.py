"""Sensor-ordered scans: pulses, echoes, file I/O and the pulse 6-neighborhood.

A scan is stored column-wise. Pulses own contiguous slices of the echo arrays
(``echo_offsets`` works like a CSR row pointer), and echo positions are always
derived from ``origin + range * direction`` rather than read from disk.

The text format has one row per echo and a mandatory header::

    pulse_id,time,theta,ox,oy,oz,dx,dy,dz,num_echoes,echo_rank,range,intensity

A pulse with no echo is a single row with ``num_echoes=0`` and empty
``echo_rank``, ``range`` and ``intensity``. The binary variant stores the same
fields as packed little-endian records after an 8 byte magic.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence, TextIO

import numpy as np

from .errors import ConfigurationError, ParameterError, ScanFormatError, ScanOrderError, ScanParseError

MAX_ECHOES = 8
HEADER = (
    "pulse_id", "time", "theta", "ox", "oy", "oz", "dx", "dy", "dz",
    "num_echoes", "echo_rank", "range", "intensity",
)
BINARY_MAGIC = b"MLSSCNB1"
BINARY_DTYPE = np.dtype([
    ("pulse_id", "<i4"), ("time", "<f8"), ("theta", "<f8"),
    ("ox", "<f8"), ("oy", "<f8"), ("oz", "<f8"),
    ("dx", "<f8"), ("dy", "<f8"), ("dz", "<f8"),
    ("num_echoes", "<i4"), ("echo_rank", "<i4"),
    ("range", "<f8"), ("intensity", "<f8"),
])
UNIT_TOL = 1e-9
N_P_SNAP = 1e-9


class DegenerateGridWarning(UserWarning):
    """n = 1: the line direction coincides with the in-line direction."""


@dataclass(frozen=True)
class Echo:
    rank: int
    range: float
    position: tuple[float, float, float]
    intensity: float | None = None


@dataclass(frozen=True)
class Pulse:
    index: int
    time: float
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    echoes: tuple[Echo, ...] = ()
    theta: float | None = None


@dataclass(frozen=True)
class ScanConfig:
    """Reader options. ``n_p`` overrides any estimate from theta."""

    n_p: float | None = None
    renormalize_directions: bool = False


def _frozen(a: np.ndarray, dtype=None) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


class Scan:
    """Immutable, column-oriented scan.

    Pulse ``k`` (0-based position, which is also its sensor-grid index) owns
    echoes ``echo_offsets[k]:echo_offsets[k + 1]``, ordered by range.
    """

    def __init__(
        self,
        pulse_id: Sequence[int],
        time: Sequence[float],
        theta: Sequence[float],
        origin: np.ndarray,
        direction: np.ndarray,
        echo_offsets: Sequence[int],
        echo_range: Sequence[float],
        echo_intensity: Sequence[float] | None = None,
        n_p: float | None = None,
    ) -> None:
        self.pulse_id = _frozen(pulse_id, np.int64)
        self.time = _frozen(time, np.float64)
        self.theta = _frozen(theta, np.float64)
        self.origin = _frozen(np.reshape(origin, (-1, 3)), np.float64)
        self.direction = _frozen(np.reshape(direction, (-1, 3)), np.float64)
        self.echo_offsets = _frozen(echo_offsets, np.int64)
        self.echo_range = _frozen(echo_range, np.float64)
        if echo_intensity is None:
            echo_intensity = np.full(len(self.echo_range), np.nan)
        self.echo_intensity = _frozen(echo_intensity, np.float64)
        self.n_p = None if n_p is None else float(n_p)
        self._validate()

        counts = np.diff(self.echo_offsets)
        self.echo_count = _frozen(counts)
        self.echo_pulse = _frozen(np.repeat(np.arange(self.n_pulses), counts))
        self.echo_rank = _frozen(np.arange(self.n_echoes) - np.repeat(self.echo_offsets[:-1], counts) + 1)
        o = self.origin[self.echo_pulse]
        d = self.direction[self.echo_pulse]
        r = self.echo_range[:, None]
        self.positions = _frozen(o + r * d)
        self.l_max = float(self.echo_range.max()) if self.n_echoes else 0.0
        self._pulses: tuple[Pulse, ...] | None = None

    def _validate(self) -> None:
        P = len(self.pulse_id)
        for name in ("time", "theta", "origin", "direction"):
            if len(getattr(self, name)) != P:
                raise ValueError(f"{name} has {len(getattr(self, name))} rows, expected {P}")
        if len(self.echo_offsets) != P + 1 or (P + 1 and self.echo_offsets[0] != 0):
            raise ValueError("echo_offsets must have pulse_count + 1 entries starting at 0")
        counts = np.diff(self.echo_offsets)
        if np.any(counts < 0) or np.any(counts > MAX_ECHOES):
            raise ValueError(f"echo counts must lie in 0..{MAX_ECHOES}")
        if self.echo_offsets[-1] != len(self.echo_range) or len(self.echo_intensity) != len(self.echo_range):
            raise ValueError("echo arrays do not match echo_offsets")
        if P > 1 and np.any(np.diff(self.pulse_id) != 1):
            raise ValueError("pulse ids must be strictly increasing and contiguous")
        if not np.all(np.isfinite(self.echo_range)) or np.any(self.echo_range <= 0):
            raise ValueError("echo ranges must be finite and > 0")
        if len(self.echo_range) > 1:
            same_pulse = np.diff(np.repeat(np.arange(P), counts)) == 0
            if np.any(np.diff(self.echo_range)[same_pulse] < 0):
                raise ValueError("echoes must be ordered by increasing range")
        norm = np.sqrt(self.direction[:, 0] ** 2 + self.direction[:, 1] ** 2 + self.direction[:, 2] ** 2)
        if np.any(np.abs(norm - 1.0) > UNIT_TOL):
            raise ValueError("beam directions must be unit vectors")
        if self.n_p is not None and not self.n_p > 2:
            raise ParameterError(f"N_p must be > 2, got {self.n_p}")

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_id)

    @property
    def n_echoes(self) -> int:
        return len(self.echo_range)

    def echo_index(self, pulse: int, rank: int) -> int:
        """Global echo index of echo ``rank`` (1-based) of grid pulse ``pulse``."""
        if not 1 <= rank <= self.echo_count[pulse]:
            raise IndexError(f"pulse {pulse} has no echo of rank {rank}")
        return int(self.echo_offsets[pulse]) + rank - 1

    def pulse(self, k: int) -> Pulse:
        lo, hi = self.echo_offsets[k], self.echo_offsets[k + 1]
        echoes = tuple(
            Echo(
                rank=j - lo + 1,
                range=float(self.echo_range[j]),
                position=tuple(float(v) for v in self.positions[j]),
                intensity=None if math.isnan(self.echo_intensity[j]) else float(self.echo_intensity[j]),
            )
            for j in range(lo, hi)
        )
        th = float(self.theta[k])
        return Pulse(
            index=int(self.pulse_id[k]),
            time=float(self.time[k]),
            origin=tuple(float(v) for v in self.origin[k]),
            direction=tuple(float(v) for v in self.direction[k]),
            echoes=echoes,
            theta=None if math.isnan(th) else th,
        )

    @property
    def pulses(self) -> tuple[Pulse, ...]:
        if self._pulses is None:
            self._pulses = tuple(self.pulse(k) for k in range(self.n_pulses))
        return self._pulses

    @classmethod
    def from_pulses(cls, pulses: Iterable[Pulse], n_p: float | None = None) -> "Scan":
        pulses = list(pulses)
        counts = [len(p.echoes) for p in pulses]
        return cls(
            pulse_id=[p.index for p in pulses],
            time=[p.time for p in pulses],
            theta=[np.nan if p.theta is None else p.theta for p in pulses],
            origin=np.array([p.origin for p in pulses], dtype=float).reshape(-1, 3),
            direction=np.array([p.direction for p in pulses], dtype=float).reshape(-1, 3),
            echo_offsets=np.concatenate([[0], np.cumsum(counts, dtype=np.int64)]),
            echo_range=[e.range for p in pulses for e in p.echoes],
            echo_intensity=[np.nan if e.intensity is None else e.intensity for p in pulses for e in p.echoes],
            n_p=n_p,
        )

    def with_n_p(self, n_p: float | None) -> "Scan":
        return Scan(
            self.pulse_id, self.time, self.theta, self.origin, self.direction,
            self.echo_offsets, self.echo_range, self.echo_intensity, n_p,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scan):
            return NotImplemented
        fields = ("pulse_id", "time", "theta", "origin", "direction", "echo_offsets", "echo_range", "echo_intensity")
        return self.n_p == other.n_p and all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True) for f in fields
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Scan(pulses={self.n_pulses}, echoes={self.n_echoes}, n_p={self.n_p}, l_max={self.l_max:.3f})"


# ---------------------------------------------------------------------------
# Sensor topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensorGrid:
    n: int
    pulse_count: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"grid line length n must be >= 1, got {self.n}")
        if self.pulse_count < 0:
            raise ParameterError("pulse_count must be >= 0")

    @classmethod
    def from_n_p(cls, n_p: float, pulse_count: int) -> "SensorGrid":
        """Grid with ``n = floor(n_p)``.

        Values within ``N_P_SNAP`` (relative) of an integer count as that
        integer, so an estimate like 359.9999999999 gives n = 360, not 359.
        """
        r = round(n_p)
        n = r if abs(n_p - r) <= N_P_SNAP * max(1.0, abs(n_p)) else math.floor(n_p)
        return cls(n=int(n), pulse_count=pulse_count)

    @classmethod
    def from_scan(cls, scan: Scan) -> "SensorGrid":
        if scan.n_p is None:
            raise ConfigurationError("scan has no pulses-per-rotation value")
        return cls.from_n_p(scan.n_p, scan.n_pulses)

    def neighbors(self, i: int) -> set[int]:
        return pulse_neighbors(self, i)

    @property
    def directions(self) -> tuple[int, ...]:
        return forward_directions(self)


def pulse_neighbors(grid: SensorGrid, i: int) -> set[int]:
    """Up to six pulses adjacent to ``i``: i±1, i±n and i±(n+1), clipped to the scan."""
    if not 0 <= i < grid.pulse_count:
        raise IndexError(f"pulse index {i} outside [0, {grid.pulse_count})")
    n = grid.n
    cand = (i - 1, i + 1, i - n, i - n - 1, i + n, i + n + 1)
    return {j for j in cand if 0 <= j < grid.pulse_count and j != i}


def forward_directions(grid: SensorGrid) -> tuple[int, ...]:
    """Index offsets that enumerate each neighboring pulse pair exactly once."""
    n = grid.n
    if n == 1:
        warnings.warn("n = 1: duplicate direction collapsed to (1, 2)", DegenerateGridWarning, stacklevel=2)
        return (1, 2)
    return (1, n, n + 1)


def estimate_pulses_per_rotation(scan: Scan, override: float | None = None) -> float:
    """Pulses per 2*pi rotation, from the median unwrapped theta step.

    ``override`` always wins. Pulses without theta are skipped; steps across
    such gaps are divided by the index distance.
    """
    if override is not None:
        if not override > 2:
            raise ParameterError(f"N_p override must be > 2, got {override}")
        return float(override)
    valid = np.flatnonzero(~np.isnan(scan.theta))
    if len(valid) < 2:
        raise ConfigurationError("cannot estimate N_p: fewer than two pulses carry theta and no override given")
    unwrapped = np.unwrap(scan.theta[valid])
    steps = np.abs(np.diff(unwrapped) / np.diff(valid))
    step = float(np.median(steps))
    if step <= 0:
        raise ConfigurationError("cannot estimate N_p: theta does not advance")
    n_p = 2.0 * math.pi / step
    if not n_p > 2:
        raise ConfigurationError(f"estimated N_p = {n_p:.6g} is not > 2")
    return n_p


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------


def _float(field: str, name: str, line: int, optional: bool = False) -> float:
    if field == "":
        if optional:
            return math.nan
        raise ScanParseError(f"missing value for {name}", line)
    try:
        return float(field)
    except ValueError:
        raise ScanParseError(f"{name}: not a number: {field!r}", line) from None


def _int(field: str, name: str, line: int, optional: bool = False) -> int:
    if field == "":
        if optional:
            return 0
        raise ScanParseError(f"missing value for {name}", line)
    try:
        return int(field)
    except ValueError:
        raise ScanParseError(f"{name}: not an integer: {field!r}", line) from None


def _read_text_rows(stream: TextIO) -> tuple[np.ndarray, np.ndarray]:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ScanParseError("empty file: header line required", 1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise ScanParseError(f"bad header, expected {','.join(HEADER)}", 1)
    records = []
    lines = []
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(HEADER):
            raise ScanParseError(f"expected {len(HEADER)} fields, got {len(row)}", line)
        row = [f.strip() for f in row]
        n_echoes = _int(row[9], "num_echoes", line)
        empty = n_echoes == 0
        if empty and any(row[k] for k in (10, 11, 12)):
            raise ScanFormatError("empty pulse must leave echo_rank, range and intensity blank", line)
        records.append((
            _int(row[0], "pulse_id", line),
            _float(row[1], "time", line),
            _float(row[2], "theta", line, optional=True),
            *(_float(row[k], HEADER[k], line) for k in range(3, 9)),
            n_echoes,
            _int(row[10], "echo_rank", line, optional=empty),
            _float(row[11], "range", line, optional=empty),
            _float(row[12], "intensity", line, optional=True),
        ))
        lines.append(line)
    return np.array(records, dtype=BINARY_DTYPE), np.array(lines, dtype=np.int64)


def _read_binary_rows(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    body = data[len(BINARY_MAGIC):]
    if len(body) % BINARY_DTYPE.itemsize:
        raise ScanParseError(
            f"truncated binary scan: {len(body)} bytes is not a multiple of {BINARY_DTYPE.itemsize}",
            len(body) // BINARY_DTYPE.itemsize + 1,
        )
    rows = np.frombuffer(body, dtype=BINARY_DTYPE)
    return rows, np.arange(1, len(rows) + 1, dtype=np.int64)


def _rows_to_scan(rows: np.ndarray, lines: np.ndarray, config: ScanConfig) -> Scan:
    if len(rows) == 0:
        return Scan([], [], [], np.zeros((0, 3)), np.zeros((0, 3)), [0], [], [], n_p=config.n_p)
    ids = rows["pulse_id"].astype(np.int64)
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    gids = ids[starts]
    step = np.diff(gids)
    bad = np.flatnonzero(step != 1)
    if len(bad):
        k = bad[0] + 1
        kind = "not increasing" if step[bad[0]] < 1 else "not contiguous"
        raise ScanOrderError(f"pulse id {gids[k]} after {gids[k - 1]}: {kind}", int(lines[starts[k]]))

    counts = np.diff(np.r_[starts, len(rows)])
    ne = rows["num_echoes"][starts].astype(np.int64)
    first = np.repeat(starts, counts)
    ne_rows = rows["num_echoes"]
    for name in ("num_echoes", "time", "ox", "oy", "oz", "dx", "dy", "dz"):
        diff = np.flatnonzero(rows[name] != rows[name][first])
        if len(diff):
            raise ScanFormatError(f"{name} differs between rows of the same pulse", int(lines[diff[0]]))
    th = rows["theta"]
    diff = np.flatnonzero(~((th == th[first]) | (np.isnan(th) & np.isnan(th[first]))))
    if len(diff):
        raise ScanFormatError("theta differs between rows of the same pulse", int(lines[diff[0]]))

    bad = np.flatnonzero((ne > MAX_ECHOES) | (ne < 0))
    if len(bad):
        raise ScanFormatError(f"num_echoes={ne[bad[0]]} outside 0..{MAX_ECHOES}", int(lines[starts[bad[0]]]))
    expected_rows = np.maximum(ne, 1)
    bad = np.flatnonzero(counts != expected_rows)
    if len(bad):
        k = bad[0]
        raise ScanFormatError(
            f"pulse {gids[k]} declares {ne[k]} echoes but has {counts[k]} rows", int(lines[starts[k]])
        )

    has_echo = ne_rows > 0
    within = np.arange(len(rows)) - first + 1
    bad = np.flatnonzero(has_echo & (rows["echo_rank"] != within))
    if len(bad):
        raise ScanFormatError(f"echo_rank {rows['echo_rank'][bad[0]]}, expected {within[bad[0]]}", int(lines[bad[0]]))
    rng = rows["range"][has_echo]
    eline = lines[has_echo]
    bad = np.flatnonzero(~np.isfinite(rng) | (rng <= 0))
    if len(bad):
        raise ScanFormatError(f"range must be > 0, got {rng[bad[0]]}", int(eline[bad[0]]))
    epulse = np.repeat(np.arange(len(starts)), ne)
    bad = np.flatnonzero((np.diff(rng) < 0) & (np.diff(epulse) == 0))
    if len(bad):
        raise ScanFormatError("echoes not ordered by increasing range", int(eline[bad[0] + 1]))

    pr = rows[starts]
    direction = np.stack([pr["dx"], pr["dy"], pr["dz"]], axis=1)
    norm = np.sqrt(direction[:, 0] ** 2 + direction[:, 1] ** 2 + direction[:, 2] ** 2)
    if config.renormalize_directions:
        if np.any(norm == 0):
            raise ScanFormatError("zero beam direction", int(lines[starts[np.flatnonzero(norm == 0)[0]]]))
        direction = direction / norm[:, None]
    else:
        bad = np.flatnonzero(np.abs(norm - 1.0) > UNIT_TOL)
        if len(bad):
            raise ScanFormatError(f"beam direction not unit length (|d| = {norm[bad[0]]!r})", int(lines[starts[bad[0]]]))

    return Scan(
        pulse_id=gids,
        time=pr["time"],
        theta=pr["theta"],
        origin=np.stack([pr["ox"], pr["oy"], pr["oz"]], axis=1),
        direction=direction,
        echo_offsets=np.r_[0, np.cumsum(ne)],
        echo_range=rng,
        echo_intensity=rows["intensity"][has_echo],
        n_p=None,
    )


def parse_scan(source: bytes | BinaryIO | TextIO | str | Path, config: ScanConfig | None = None) -> Scan:
    """Read a text or binary scan and resolve its pulses-per-rotation value.

    ``source`` may be a path, raw bytes, or an open stream. The binary variant
    is recognized by its magic. ``config.n_p`` overrides the theta estimate.
    """
    config = config or ScanConfig()
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    if data.startswith(BINARY_MAGIC):
        rows, lines = _read_binary_rows(data)
    else:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScanParseError(f"not a text or binary scan file: {exc}") from None
        rows, lines = _read_text_rows(io.StringIO(text, newline=""))
    scan = _rows_to_scan(rows, lines, config)
    if scan.n_pulses == 0 and config.n_p is None:
        return scan
    return scan.with_n_p(estimate_pulses_per_rotation(scan, config.n_p))


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def _scan_rows(scan: Scan) -> np.ndarray:
    counts = scan.echo_count
    n_rows = np.maximum(counts, 1)
    pulse_of_row = np.repeat(np.arange(scan.n_pulses), n_rows)
    rows = np.zeros(len(pulse_of_row), dtype=BINARY_DTYPE)
    rows["pulse_id"] = scan.pulse_id[pulse_of_row]
    rows["time"] = scan.time[pulse_of_row]
    rows["theta"] = scan.theta[pulse_of_row]
    for k, name in enumerate(("ox", "oy", "oz")):
        rows[name] = scan.origin[pulse_of_row, k]
    for k, name in enumerate(("dx", "dy", "dz")):
        rows[name] = scan.direction[pulse_of_row, k]
    rows["num_echoes"] = counts[pulse_of_row]
    has_echo = rows["num_echoes"] > 0
    rows["echo_rank"][has_echo] = scan.echo_rank
    rows["range"] = np.nan
    rows["intensity"] = np.nan
    rows["range"][has_echo] = scan.echo_range
    rows["intensity"][has_echo] = scan.echo_intensity
    return rows


def write_scan(scan: Scan, dest: str | Path | TextIO | BinaryIO, binary: bool = False) -> None:
    """Serialize ``scan``; floats use the shortest round-trip representation."""
    rows = _scan_rows(scan)
    if binary:
        payload = BINARY_MAGIC + rows.tobytes()
        if isinstance(dest, (str, Path)):
            Path(dest).write_bytes(payload)
        else:
            dest.write(payload)
        return
    out = [",".join(HEADER)]
    for r in rows.tolist():
        pid, t, th, ox, oy, oz, dx, dy, dz, ne, rank, rng, inten = r
        head = f"{pid},{_fmt(t)},{_fmt(th)},{_fmt(ox)},{_fmt(oy)},{_fmt(oz)},{_fmt(dx)},{_fmt(dy)},{_fmt(dz)},{ne}"
        if ne == 0:
            out.append(head + ",,,")
        else:
            out.append(f"{head},{rank},{_fmt(rng)},{_fmt(inten)}")
    text = "\n".join(out) + "\n"
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, newline="\n")
    else:
        dest.write(text)
