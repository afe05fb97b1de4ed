"""Time-domain Radon maps: full-band delay-and-sum over a polar grid.

Each map cell (n, theta) steers the array to the in-plane point at radius
rho_n = n c / fs and angle theta.  Every channel's half-wave rectified
impulse response is read at the fractional sample matching that cell's
path length, weighted by the path length, and accumulated; the finished
map is normalised by its maximum.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InvalidFileFormat
from .simulator import RIRSet, ULAConfig, positive_part

_MAP_MAGIC = int.from_bytes(b"RTM1", "little")
_MAP_VERSION = 1
_HEADER = struct.Struct("<iiiifffi")


@dataclass(frozen=True)
class RadonGrid:
    """Polar sampling grid tied to a sample rate and sound speed.

    The radial index doubles as a sample index: rho_n = n c / fs, with
    n running to round(fs rho_max / c) - 1.  Angles cover [0, 180]
    degrees inclusive.
    """

    rho_max: float = 15.0
    fs: int = 48_000
    c: float = 343.0
    theta_step: float = 1.0

    def __post_init__(self):
        if self.rho_max <= 0 or self.fs <= 0 or self.c <= 0:
            raise ValueError("rho_max, fs and c must be positive")
        steps = 180.0 / self.theta_step
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("theta_step must divide 180 degrees")

    @property
    def num_radii(self) -> int:
        return int(np.rint(self.fs * self.rho_max / self.c))

    @property
    def theta_count(self) -> int:
        return int(round(180.0 / self.theta_step)) + 1

    def radii(self) -> np.ndarray:
        return np.arange(self.num_radii) * (self.c / self.fs)

    def thetas(self) -> np.ndarray:
        return np.arange(self.theta_count) * self.theta_step

    def fingerprint(self) -> str:
        """Short stable hash of the grid parameters."""
        key = (f"{self.fs}:{self.c!r}:{self.rho_max!r}:{self.theta_step!r}:"
               f"{self.num_radii}:{self.theta_count}")
        return hashlib.sha1(key.encode()).hexdigest()[:12]


@dataclass(eq=False)
class SteeringTable:
    """Per-cell, per-channel path lengths and fractional delays."""

    dist: np.ndarray    # (N, T, M)
    delay: np.ndarray   # (N, T, M)
    grid: RadonGrid
    ula: ULAConfig


@dataclass(eq=False)
class RadonMap:
    """Map values (time-major, shape (N, theta_count)) on their grid."""

    values: np.ndarray
    grid: RadonGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expect = (self.grid.num_radii, self.grid.theta_count)
        if self.values.shape != expect:
            raise ValueError(
                f"map shape {self.values.shape} does not match grid {expect}")


def build_steering(ula: ULAConfig, grid: RadonGrid) -> SteeringTable:
    """Precompute distances and delays for every (cell, channel) pair.

    Steering points sit in the z = 0 plane; the delay is the channel's
    read offset (fs / c)(rho_n - dist), so a cell reads each channel at
    sample n - delay = (fs / c) dist.
    """
    rho = grid.radii()[:, None]
    th = np.radians(grid.thetas())[None, :]
    x = rho * np.cos(th)
    y = rho * np.sin(th)
    sx = ula.positions()[:, 0]
    # |steer - s_m|^2 = rho^2 - 2 x s_m + s_m^2
    d2 = (x * x + y * y)[:, :, None] - 2.0 * x[:, :, None] * sx + sx * sx
    dist = np.sqrt(np.maximum(d2, 0.0))
    delay = (grid.fs / grid.c) * (rho[:, :, None] - dist)
    return SteeringTable(dist, delay, grid, ula)


def _interp_read(h: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Linear interpolation of ``h`` at fractional indices, zero outside."""
    i0 = np.floor(t).astype(np.int64)
    frac = t - i0
    n = h.shape[0]
    v0 = np.where((i0 >= 0) & (i0 < n), h[np.clip(i0, 0, n - 1)], 0.0)
    i1 = i0 + 1
    v1 = np.where((i1 >= 0) & (i1 < n), h[np.clip(i1, 0, n - 1)], 0.0)
    return (1.0 - frac) * v0 + frac * v1


def radon_map(
    rirs: RIRSet,
    ula: ULAConfig,
    grid: RadonGrid,
    steering: SteeringTable | None = None,
) -> RadonMap:
    """Accumulate the delay-and-sum map and normalise by its maximum.

    An all-zero accumulation is returned unnormalised.
    """
    if rirs.fs != grid.fs:
        raise GridMismatch(
            f"RIR sample rate {rirs.fs} does not match grid fs {grid.fs}")
    if rirs.num_channels != ula.num_speakers:
        raise GridMismatch(
            f"{rirs.num_channels} channels for a {ula.num_speakers}-speaker array")
    if steering is None:
        steering = build_steering(ula, grid)
    elif steering.grid != grid or steering.ula != ula:
        raise GridMismatch("steering table built for a different grid or array")

    hp = positive_part(rirs.channels)
    n_idx = np.arange(grid.num_radii, dtype=float)[:, None]
    acc = np.zeros((grid.num_radii, grid.theta_count))
    for m in range(ula.num_speakers):
        t = n_idx - steering.delay[:, :, m]
        acc += steering.dist[:, :, m] * _interp_read(hp[m], t)
    peak = acc.max()
    if peak > 0:
        acc /= peak
    return RadonMap(acc, grid)


def radon_map_reference(
    rirs: RIRSet, ula: ULAConfig, grid: RadonGrid,
) -> RadonMap:
    """Naive triple-loop reference for the optimised accumulation.

    Scalar arithmetic cell by cell; far too slow for production but the
    ground truth the fast path is checked against.
    """
    if rirs.fs != grid.fs:
        raise GridMismatch(
            f"RIR sample rate {rirs.fs} does not match grid fs {grid.fs}")
    steering = build_steering(ula, grid)
    hp = positive_part(rirs.channels)
    acc = _reference_kernel(hp, steering.dist, steering.delay)
    peak = acc.max()
    if peak > 0:
        acc /= peak
    return RadonMap(acc, grid)


def _reference_kernel(hp, dist, delay):
    """Triple loop over (radius, angle, channel) with scalar interpolation.

    Kept free of vectorisation so it can serve as an independent oracle;
    compatible with nopython compilation for test-time speed.
    """
    n_r, n_t, n_m = dist.shape
    length = hp.shape[1]
    acc = np.zeros((n_r, n_t))
    for n in range(n_r):
        for t in range(n_t):
            total = 0.0
            for m in range(n_m):
                pos = n - delay[n, t, m]
                i0 = int(np.floor(pos))
                frac = pos - i0
                v0 = hp[m, i0] if 0 <= i0 < length else 0.0
                v1 = hp[m, i0 + 1] if 0 <= i0 + 1 < length else 0.0
                total += dist[n, t, m] * ((1.0 - frac) * v0 + frac * v1)
            acc[n, t] = total
    return acc


# ---------------------------------------------------------------------------
# exports

def write_map(path, rmap: RadonMap) -> None:
    """Raw binary: 8-field header then time-major little-endian float32.

    Header fields: magic, version, N, theta_count (int32) and fs, c,
    rho_max (float32) plus a reserved int32.  Reading back and rewriting
    reproduces the file byte for byte.
    """
    g = rmap.grid
    header = _HEADER.pack(
        _MAP_MAGIC, _MAP_VERSION, g.num_radii, g.theta_count,
        float(g.fs), float(g.c), float(g.rho_max), 0)
    with open(path, "wb") as f:
        f.write(header)
        f.write(rmap.values.astype("<f4").tobytes(order="C"))


def map_record_bytes(rmap: RadonMap) -> bytes:
    """The exact bytes :func:`write_map` would produce."""
    g = rmap.grid
    header = _HEADER.pack(
        _MAP_MAGIC, _MAP_VERSION, g.num_radii, g.theta_count,
        float(g.fs), float(g.c), float(g.rho_max), 0)
    return header + rmap.values.astype("<f4").tobytes(order="C")


def map_from_bytes(raw: bytes) -> RadonMap:
    if len(raw) < _HEADER.size:
        raise InvalidFileFormat("map record shorter than its header")
    magic, version, n, t, fs, c, rho_max, _ = _HEADER.unpack_from(raw, 0)
    if magic != _MAP_MAGIC:
        raise InvalidFileFormat(f"bad map magic 0x{magic:08x}")
    if version != _MAP_VERSION:
        raise InvalidFileFormat(f"unsupported map version {version}")
    if n < 1 or t < 2:
        raise InvalidFileFormat(f"bad map shape ({n}, {t})")
    grid = RadonGrid(rho_max=float(rho_max), fs=int(round(fs)),
                     c=float(c), theta_step=180.0 / (t - 1))
    if grid.num_radii != n or grid.theta_count != t:
        raise InvalidFileFormat(
            "stored dimensions disagree with the stored grid parameters")
    expect = _HEADER.size + 4 * n * t
    if len(raw) != expect:
        raise InvalidFileFormat(
            f"map payload is {len(raw) - _HEADER.size} bytes, "
            f"expected {expect - _HEADER.size}")
    vals = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return RadonMap(vals.reshape(n, t).astype(float), grid)


def read_map(path) -> RadonMap:
    with open(path, "rb") as f:
        return map_from_bytes(f.read())


def write_map_pgm(path, rmap: RadonMap) -> None:
    """16-bit PGM for visual inspection: rows are time, columns angle."""
    v = np.clip(rmap.values, 0.0, 1.0)
    pix = np.rint(v * 65535).astype(">u2")
    header = f"P5\n{pix.shape[1]} {pix.shape[0]}\n65535\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(pix.tobytes(order="C"))


def write_map_csv(path, rmap: RadonMap) -> None:
    """Comma-separated values with an angle header row; meant for small grids."""
    thetas = ",".join(f"{t:g}" for t in rmap.grid.thetas())
    with open(path, "w", encoding="ascii") as f:
        f.write(f"n\\theta_deg,{thetas}\n")
        for n, row in enumerate(rmap.values):
            f.write(f"{n}," + ",".join(f"{x:.9g}" for x in row) + "\n")
