"""Separable room geometry: walls as oriented planes, image microphones,
label vectors, and constrained room sampling.

A room is four near-vertical side walls plus a horizontal floor and ceiling.
Each wall is a plane ``{p : v.p + d = 0}`` with ``v`` the unit normal pointing
into the room, so interior points have positive signed distance and the array
origin of a valid room has ``d > 0`` for every wall.

Coordinates: the loudspeaker array lies on the x axis centred at the origin,
the microphone is in front of it (y > 0) in the z = 0 plane.  Front/back walls
sit toward +y/-y, right/left toward +x/-x, the floor at negative z and the
ceiling at positive z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateImage,
    InvalidRadii,
    MicOutsideRoom,
    SamplingExhausted,
)

WALL_ORDER = ("back", "right", "front", "left", "floor", "ceiling")
SIDE_WALLS = WALL_ORDER[:4]

# Inward normals of an untilted room.
NOMINAL_NORMALS = {
    "back": np.array([0.0, 1.0, 0.0]),
    "right": np.array([-1.0, 0.0, 0.0]),
    "front": np.array([0.0, -1.0, 0.0]),
    "left": np.array([1.0, 0.0, 0.0]),
    "floor": np.array([0.0, 0.0, 1.0]),
    "ceiling": np.array([0.0, 0.0, -1.0]),
}

# Image pairs closer than this carry no usable wall information.
EPS_DEGENERATE = 1e-6

_REJECTION_CAP = 10_000


def as_point(p) -> np.ndarray:
    """Coerce to a finite (3,) float array."""
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("point has non-finite coordinates")
    return a


@dataclass(frozen=True, eq=False)
class Wall:
    """Oriented plane with unit inward normal ``v`` and origin distance ``d``."""

    v: np.ndarray
    d: float

    def __post_init__(self):
        v = as_point(self.v)
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"wall normal must be unit length, |v| = {n}")
        v = v / n
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "d", float(self.d))

    def signed_distance(self, p) -> float:
        """Positive on the interior side of the plane."""
        return float(self.v @ as_point(p) + self.d)


@dataclass(frozen=True)
class PolarPoint:
    """Polar coordinates in the array plane: radius and angle from +x in degrees."""

    rho: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.rho) and math.isfinite(self.theta)):
            raise ValueError("polar coordinates must be finite")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if not (0.0 <= self.theta <= 180.0):
            raise ValueError("theta must lie in [0, 180] degrees")


@dataclass(frozen=True, eq=False)
class RoomGeometry:
    """Four side walls plus floor/ceiling distances below/above the array plane."""

    back: Wall
    right: Wall
    front: Wall
    left: Wall
    d_floor: float
    d_ceiling: float

    def __post_init__(self):
        for name in SIDE_WALLS:
            w: Wall = getattr(self, name)
            if abs(w.v[2]) > 1e-9:
                raise ValueError(f"{name} wall normal must be horizontal")
        object.__setattr__(self, "d_floor", float(self.d_floor))
        object.__setattr__(self, "d_ceiling", float(self.d_ceiling))
        if not (math.isfinite(self.d_floor) and math.isfinite(self.d_ceiling)):
            raise ValueError("floor/ceiling distances must be finite")

    def side_walls(self) -> dict[str, Wall]:
        return {name: getattr(self, name) for name in SIDE_WALLS}

    def walls(self) -> dict[str, Wall]:
        out = self.side_walls()
        out["floor"] = Wall(NOMINAL_NORMALS["floor"], self.d_floor)
        out["ceiling"] = Wall(NOMINAL_NORMALS["ceiling"], self.d_ceiling)
        return out

    @property
    def height(self) -> float:
        return self.d_floor + self.d_ceiling

    def corners(self) -> np.ndarray:
        """Vertices of the side-wall polygon at z = 0.

        Order: back/right, right/front, front/left, left/back.
        """
        pairs = (("back", "right"), ("right", "front"),
                 ("front", "left"), ("left", "back"))
        pts = np.empty((4, 2))
        for i, (a, b) in enumerate(pairs):
            wa, wb = getattr(self, a), getattr(self, b)
            mat = np.array([[wa.v[0], wa.v[1]], [wb.v[0], wb.v[1]]])
            rhs = np.array([-wa.d, -wb.d])
            pts[i] = np.linalg.solve(mat, rhs)
        return pts

    def contains(self, p, margin: float = 0.0) -> bool:
        """True when ``p`` is strictly more than ``margin`` inside every wall."""
        return all(w.signed_distance(p) > margin for w in self.walls().values())


@dataclass(frozen=True, eq=False)
class MicPose:
    """Microphone position: in the array plane, in front of the array."""

    r_o: np.ndarray

    def __post_init__(self):
        p = as_point(self.r_o)
        if abs(p[2]) > 1e-12:
            raise ValueError("microphone must lie in the z = 0 plane")
        if p[1] <= 0:
            raise ValueError("microphone must be in front of the array (y > 0)")
        p.setflags(write=False)
        object.__setattr__(self, "r_o", p)


@dataclass(frozen=True)
class RoomConstraints:
    """Sampling windows for wall distances, orientations and placements.

    Per-wall bounds are (min, max) distances in metres.  ``min_height`` plus
    the floor-below-ceiling prior push sampled ceiling distances above
    ``min_height / 2`` even when the raw ceiling window starts lower; the raw
    window is still what the estimator uses as its search prior.
    """

    back: tuple[float, float] = (0.2, 1.0)
    right: tuple[float, float] = (1.5, 3.0)
    front: tuple[float, float] = (3.0, 6.0)
    left: tuple[float, float] = (1.5, 3.0)
    floor: tuple[float, float] = (0.5, 1.5)
    ceiling: tuple[float, float] = (0.7, 2.7)
    orientation_max_deg: float = 15.0
    min_height: float = 2.2
    mic_clearance: float = 0.5
    absorption: tuple[float, float] = (0.1, 0.9)
    array_half_length: float = 0.36

    def __post_init__(self):
        for name in WALL_ORDER:
            lo, hi = self.bounds(name)
            if not (0 < lo <= hi):
                raise ValueError(f"bad distance window for {name}: ({lo}, {hi})")
        if not (0 <= self.orientation_max_deg < 90):
            raise ValueError("orientation_max_deg must lie in [0, 90)")
        lo, hi = self.absorption
        if not (0 <= lo <= hi < 1):
            raise ValueError("absorption window must lie in [0, 1)")

    def bounds(self, wall: str) -> tuple[float, float]:
        if wall not in WALL_ORDER:
            raise KeyError(wall)
        return getattr(self, wall)


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Twelve regression targets: mic xy, four side-wall image xy, floor/ceiling z."""

    mic_xy: np.ndarray
    back_xy: np.ndarray
    right_xy: np.ndarray
    front_xy: np.ndarray
    left_xy: np.ndarray
    floor_z: float
    ceiling_z: float

    def __post_init__(self):
        for name in ("mic_xy", "back_xy", "right_xy", "front_xy", "left_xy"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (2,) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be a finite 2-vector")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "floor_z", float(self.floor_z))
        object.__setattr__(self, "ceiling_z", float(self.ceiling_z))
        if not (self.floor_z < 0.0 < self.ceiling_z):
            raise ValueError("expected floor_z < 0 < ceiling_z")

    def image_xy(self, wall: str) -> np.ndarray:
        if wall not in SIDE_WALLS:
            raise KeyError(wall)
        return getattr(self, f"{wall}_xy")

    def to_array(self) -> np.ndarray:
        return np.concatenate([
            self.mic_xy, self.back_xy, self.right_xy, self.front_xy,
            self.left_xy, [self.floor_z, self.ceiling_z],
        ])

    @classmethod
    def from_array(cls, a) -> "LabelVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (12,):
            raise ValueError(f"expected 12 values, got shape {a.shape}")
        return cls(a[0:2], a[2:4], a[4:6], a[6:8], a[8:10], a[10], a[11])


def wall_from_image_pair(r_o, r_img) -> Wall:
    """Recover the mirror plane from a microphone and its image.

    The normal points from the image toward the microphone, i.e. into the
    room, and ``d`` places the plane halfway between the two points.
    """
    r_o = as_point(r_o)
    r_img = as_point(r_img)
    diff = r_o - r_img
    gap = float(np.linalg.norm(diff))
    if gap <= EPS_DEGENERATE:
        raise DegenerateImage(
            f"image pair separated by {gap:.3e} m defines no wall")
    v = diff / gap
    d = -0.5 * float(v @ (r_o + r_img))
    return Wall(v, d)


def reflect_point(p, wall: Wall) -> np.ndarray:
    """Mirror ``p`` across the wall plane."""
    p = as_point(p)
    return p - 2.0 * wall.signed_distance(p) * wall.v


def polar_projection(p) -> PolarPoint:
    """Polar coordinates of a 3-D point as seen by the array.

    The radius is the full 3-D distance from the origin; the angle is
    measured from the +x axis, so points off the z = 0 plane land at the
    same (rho, theta) as their in-plane rotation about the x axis.
    """
    p = as_point(p)
    rho = float(np.linalg.norm(p))
    if rho == 0.0:
        return PolarPoint(0.0, 0.0)
    ct = float(np.clip(p[0] / rho, -1.0, 1.0))
    return PolarPoint(rho, math.degrees(math.acos(ct)))


def sidewall_candidates(pp: PolarPoint) -> tuple[np.ndarray, np.ndarray]:
    """The two in-plane points mapping to a polar cell: y >= 0 and y <= 0."""
    if pp.rho <= 0:
        raise ValueError("rho must be positive for a side-wall candidate")
    th = math.radians(pp.theta)
    x = pp.rho * math.cos(th)
    y = pp.rho * math.sin(th)
    return np.array([x, y, 0.0]), np.array([x, -y, 0.0])


def floor_ceiling_distance(rho: float, rho_o: float) -> float:
    """Wall distance of a horizontal reflector from echo and direct radii."""
    if rho_o < 0:
        raise InvalidRadii("direct-path radius must be non-negative")
    if rho < rho_o:
        raise InvalidRadii(
            f"echo radius {rho} is smaller than direct radius {rho_o}")
    return math.sqrt(max(rho * rho - rho_o * rho_o, 0.0)) / 2.0


def labels_from_room(room: RoomGeometry, mic: MicPose) -> LabelVector:
    """Forward map from geometry to the twelve regression targets."""
    if not room.contains(mic.r_o):
        raise MicOutsideRoom("microphone is not strictly inside the room")
    imgs = {name: reflect_point(mic.r_o, wall)
            for name, wall in room.side_walls().items()}
    return LabelVector(
        mic_xy=mic.r_o[:2].copy(),
        back_xy=imgs["back"][:2],
        right_xy=imgs["right"][:2],
        front_xy=imgs["front"][:2],
        left_xy=imgs["left"][:2],
        floor_z=-2.0 * room.d_floor,
        ceiling_z=2.0 * room.d_ceiling,
    )


def room_from_labels(lbl: LabelVector) -> RoomGeometry:
    """Inverse of :func:`labels_from_room`; exact up to floating point."""
    mic3 = np.array([lbl.mic_xy[0], lbl.mic_xy[1], 0.0])
    walls = {}
    for name in SIDE_WALLS:
        xy = lbl.image_xy(name)
        img3 = np.array([xy[0], xy[1], 0.0])
        try:
            walls[name] = wall_from_image_pair(mic3, img3)
        except DegenerateImage:
            raise DegenerateImage(
                f"degenerate image pair for {name} wall", wall=name)
    return RoomGeometry(
        d_floor=abs(lbl.floor_z) / 2.0,
        d_ceiling=abs(lbl.ceiling_z) / 2.0,
        **walls,
    )


def _rotate_z(v: np.ndarray, angle_rad: float) -> np.ndarray:
    ca, sa = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([ca * v[0] - sa * v[1], sa * v[0] + ca * v[1], v[2]])


def _array_distance(x: float, y: float, half_length: float) -> float:
    """Distance from an in-plane point to the array segment on the x axis."""
    dx = max(abs(x) - half_length, 0.0)
    return math.hypot(dx, y)


def sample_room(
    constraints: RoomConstraints, seed: int,
) -> tuple[RoomGeometry, MicPose, np.ndarray]:
    """Draw a room, a microphone pose, and six wall absorptions.

    Deterministic for a given seed.  Floor/ceiling draws are rejected until
    the room is at least ``min_height`` tall with the array nearer the floor
    than the ceiling; the microphone is rejection-sampled uniformly over the
    side-wall polygon until it clears every side wall and the array itself.

    Returns
    -------
    (room, mic, absorptions)
        ``absorptions`` are ordered back, right, front, left, floor, ceiling.
    """
    rng = np.random.default_rng(seed)
    c = constraints

    walls = {}
    for name in SIDE_WALLS:
        lo, hi = c.bounds(name)
        d = float(rng.uniform(lo, hi))
        tilt = math.radians(
            float(rng.uniform(-c.orientation_max_deg, c.orientation_max_deg)))
        walls[name] = Wall(_rotate_z(NOMINAL_NORMALS[name], tilt), d)

    for _ in range(_REJECTION_CAP):
        d_floor = float(rng.uniform(*c.bounds("floor")))
        d_ceiling = float(rng.uniform(*c.bounds("ceiling")))
        if d_floor + d_ceiling >= c.min_height and d_floor < d_ceiling:
            break
    else:
        raise SamplingExhausted("no floor/ceiling pair satisfied the height prior")
    room = RoomGeometry(d_floor=d_floor, d_ceiling=d_ceiling, **walls)

    absorptions = rng.uniform(c.absorption[0], c.absorption[1], size=6)

    corners = room.corners()
    xmin, ymin = corners.min(axis=0)
    xmax, ymax = corners.max(axis=0)
    mic = None
    for _ in range(_REJECTION_CAP):
        x = float(rng.uniform(xmin, xmax))
        y = float(rng.uniform(ymin, ymax))
        if y <= 0:
            continue
        p = np.array([x, y, 0.0])
        if min(w.signed_distance(p) for w in walls.values()) < c.mic_clearance:
            continue
        if _array_distance(x, y, c.array_half_length) < c.mic_clearance:
            continue
        mic = MicPose(p)
        break
    if mic is None:
        raise SamplingExhausted("no microphone position satisfied the clearances")
    return room, mic, absorptions


def check_sample(
    room: RoomGeometry,
    mic: MicPose,
    absorptions,
    constraints: RoomConstraints,
) -> list[str]:
    """Independently re-check a sampled configuration against its constraints.

    Returns a list of human-readable violations; empty means valid.
    """
    c = constraints
    problems = []

    for name in SIDE_WALLS:
        w: Wall = getattr(room, name)
        lo, hi = c.bounds(name)
        if not (lo - 1e-12 <= w.d <= hi + 1e-12):
            problems.append(f"{name} distance {w.d} outside [{lo}, {hi}]")
        cosang = float(np.clip(w.v @ NOMINAL_NORMALS[name], -1.0, 1.0))
        dev = math.degrees(math.acos(cosang))
        if dev > c.orientation_max_deg + 1e-9:
            problems.append(f"{name} orientation deviates {dev:.3f} deg")
    for name in ("floor", "ceiling"):
        d = room.d_floor if name == "floor" else room.d_ceiling
        lo, hi = c.bounds(name)
        if not (lo - 1e-12 <= d <= hi + 1e-12):
            problems.append(f"{name} distance {d} outside [{lo}, {hi}]")
    if room.height < c.min_height - 1e-12:
        problems.append(f"height {room.height} below {c.min_height}")
    if not room.d_floor < room.d_ceiling:
        problems.append("array is not nearer the floor than the ceiling")

    sides = room.side_walls()
    for name, w in sides.items():
        if w.d <= 0:
            problems.append(f"{name} wall has non-positive origin distance")
    corners = room.corners()
    for i, (a, b) in enumerate((("back", "right"), ("right", "front"),
                                ("front", "left"), ("left", "back"))):
        p = np.array([corners[i, 0], corners[i, 1], 0.0])
        for other, w in sides.items():
            if other in (a, b):
                continue
            if w.signed_distance(p) < -1e-9:
                problems.append(
                    f"corner {a}/{b} lies outside the {other} wall")

    p = mic.r_o
    for name, w in sides.items():
        if w.signed_distance(p) < c.mic_clearance - 1e-9:
            problems.append(f"microphone too close to {name} wall")
    if _array_distance(p[0], p[1], c.array_half_length) < c.mic_clearance - 1e-9:
        problems.append("microphone too close to the array")

    ab = np.asarray(absorptions, dtype=float)
    if ab.shape != (6,):
        problems.append(f"expected 6 absorptions, got shape {ab.shape}")
    else:
        lo, hi = c.absorption
        if np.any(ab < lo - 1e-12) or np.any(ab > hi + 1e-12):
            problems.append("absorption outside its window")
    return problems
