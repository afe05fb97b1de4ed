"""Error measures for estimated rooms and aggregate reporting.

Distances compare plane offsets, orientations compare inward normals via
the clamped arccos of their dot product.  Horizontal surfaces have fixed
normals, so only the four side walls enter the orientation aggregate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonUnitNormal
from .geometry import SIDE_WALLS, WALL_ORDER, RoomGeometry, Wall

#: display order for per-wall report rows
REPORT_ORDER = ("back", "right", "front", "left", "floor", "ceiling")

_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class WallError:
    """Distance error in metres and orientation error in degrees."""

    eps_d: float
    eps_theta: float


@dataclass(frozen=True)
class RoomError:
    """Root-mean-square errors over a room's surfaces.

    ``e_d`` covers all six surfaces; ``e_theta`` the four side walls.
    """

    e_d: float
    e_theta: float


@dataclass(eq=False)
class RoomComparison:
    """Per-wall and per-room errors for one truth/estimate pair."""

    walls: dict[str, WallError]
    room: RoomError


@dataclass(eq=False)
class AggregateReport:
    """Mean and population standard deviation per wall and per room."""

    count: int
    wall_d: dict[str, tuple[float, float]]       # metres
    wall_theta: dict[str, tuple[float, float]]   # degrees, side walls only
    room_d: tuple[float, float]
    room_theta: tuple[float, float]


def _check_unit(v: np.ndarray, label: str) -> None:
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > _UNIT_TOL:
        raise NonUnitNormal(f"{label} normal has length {n}")


def wall_error(truth: Wall, estimate: Wall) -> WallError:
    """Compare two oriented planes."""
    _check_unit(truth.v, "truth")
    _check_unit(estimate.v, "estimate")
    dot = float(np.clip(truth.v @ estimate.v, -1.0, 1.0))
    return WallError(
        eps_d=abs(truth.d - estimate.d),
        eps_theta=math.degrees(math.acos(dot)),
    )


def room_error(truth: RoomGeometry, estimate: RoomGeometry) -> RoomComparison:
    """Per-wall errors plus the room's RMS summary."""
    tw, ew = truth.walls(), estimate.walls()
    walls = {name: wall_error(tw[name], ew[name]) for name in WALL_ORDER}
    d_sq = [walls[name].eps_d ** 2 for name in WALL_ORDER]
    t_sq = [walls[name].eps_theta ** 2 for name in SIDE_WALLS]
    return RoomComparison(
        walls=walls,
        room=RoomError(
            e_d=math.sqrt(sum(d_sq) / 6.0),
            e_theta=math.sqrt(sum(t_sq) / 4.0),
        ),
    )


def aggregate(comparisons: list[RoomComparison]) -> AggregateReport:
    """Mean and population std across rooms, wall by wall and overall."""
    if not comparisons:
        raise EmptyInput("nothing to aggregate")

    def stats(values) -> tuple[float, float]:
        a = np.asarray(values, dtype=float)
        return float(a.mean()), float(a.std())

    wall_d = {}
    wall_theta = {}
    for name in REPORT_ORDER:
        wall_d[name] = stats([c.walls[name].eps_d for c in comparisons])
        if name in SIDE_WALLS:
            wall_theta[name] = stats(
                [c.walls[name].eps_theta for c in comparisons])
    return AggregateReport(
        count=len(comparisons),
        wall_d=wall_d,
        wall_theta=wall_theta,
        room_d=stats([c.room.e_d for c in comparisons]),
        room_theta=stats([c.room.e_theta for c in comparisons]),
    )


def report_to_dict(report: AggregateReport) -> dict:
    """JSON-friendly rendering, distances in metres."""
    rows = {}
    for name in REPORT_ORDER:
        row = {"eps_d_mean": report.wall_d[name][0],
               "eps_d_std": report.wall_d[name][1]}
        if name in report.wall_theta:
            row["eps_theta_mean"] = report.wall_theta[name][0]
            row["eps_theta_std"] = report.wall_theta[name][1]
        rows[name] = row
    return {
        "count": report.count,
        "std_convention": "population",
        "walls": rows,
        "room": {
            "e_d_mean": report.room_d[0],
            "e_d_std": report.room_d[1],
            "e_theta_mean": report.room_theta[0],
            "e_theta_std": report.room_theta[1],
        },
    }


def render_report(report: AggregateReport) -> str:
    """Fixed-width table with distances in centimetres and angles in degrees."""
    lines = [
        f"rooms: {report.count}   (std: population)",
        f"{'wall':<10}{'eps_d [cm]':>16}{'eps_theta [deg]':>20}",
    ]

    def pm(mean, std):
        return f"{mean:.3f} +/- {std:.3f}"

    for name in REPORT_ORDER:
        dm, ds = report.wall_d[name]
        cell_d = pm(dm * 100.0, ds * 100.0)
        if name in report.wall_theta:
            tm, ts = report.wall_theta[name]
            cell_t = pm(tm, ts)
        else:
            cell_t = "-"
        lines.append(f"{name:<10}{cell_d:>16}{cell_t:>20}")
    dm, ds = report.room_d
    tm, ts = report.room_theta
    lines.append(
        f"{'room':<10}{pm(dm * 100.0, ds * 100.0):>16}{pm(tm, ts):>20}")
    return "\n".join(lines)
