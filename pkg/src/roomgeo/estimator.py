"""Classical readout of room geometry from a Radon map.

The direct path is the earliest strong peak and fixes the microphone.  Side
walls are found by interpreting map cells as candidate image microphones:
a cell belongs to a wall's prior region when the implied mirror plane falls
inside that wall's distance window and orientation cone.  Floor and ceiling
echoes share the microphone's angle, so they are read from a radial band
near it and split by the nearer-echo-is-the-floor prior.  The back and
front walls, whose regions collect the strongest multi-bounce ghosts, are
chosen jointly: every candidate pair is completed into a full room and
ranked by how much of the detected peak energy that room's own mirror
images account for.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import geometry as geo
from .errors import InvalidFileFormat, MissingDirectPath, MissingWallPeak
from .geometry import (
    EPS_DEGENERATE,
    NOMINAL_NORMALS,
    SIDE_WALLS,
    LabelVector,
    RoomConstraints,
    RoomGeometry,
)
from .radon import RadonMap


@dataclass(frozen=True)
class PeakCandidate:
    """One detected map peak."""

    n: int
    theta_index: int
    rho: float
    theta: float
    amplitude: float


@dataclass(frozen=True)
class EstimatorConfig:
    """Tunables for peak picking and the direct-path gate.

    ``min_separation`` is (radial samples, degrees).  The direct-path gate
    demands that the earliest peak above ``onset_amplitude`` coincides with
    the earliest peak above ``direct_min_amplitude``: significant energy
    ahead of a strong arrival means the direct path is missing or degraded.
    """

    min_prominence: float = 0.05
    min_separation: tuple[int, float] = (8, 3.0)
    onset_amplitude: float = 0.3
    direct_min_amplitude: float = 0.4
    region_floor_frac: float = 0.6
    cone_margin_deg: float = 2.0
    fc_x_tol: float = 0.12
    fc_min_amplitude: float = 0.22
    fc_ghost_min: float = 0.05
    band_pad: float = 0.03
    lift_tol: float = 0.1
    lift_base_min: float = 0.2
    strong_floor: float = 0.15
    order_tols: tuple[float, ...] = (0.08, 0.2, 0.32, 0.4)
    order_weights: tuple[float, ...] = (1.0, 0.7, 0.4, 0.25)
    joint_cap: int = 12
    mic_window_slack: float = 0.1


@dataclass(eq=False)
class PriorRegions:
    """Boolean cell masks for each estimation target on a given grid."""

    mic: np.ndarray
    sides: dict[str, np.ndarray]
    side_branch: dict[str, np.ndarray]
    fc: np.ndarray
    ribbon: np.ndarray
    floor_band: tuple[float, float]
    ceiling_band: tuple[float, float]


def detect_peaks(
    rmap: RadonMap,
    min_prominence: float = 0.05,
    min_separation: tuple[int, float] = (8, 3.0),
) -> list[PeakCandidate]:
    """Neighbourhood maxima above a threshold, strongest first.

    A cell wins when nothing in its (2 dn + 1) x (2 dt + 1) neighbourhood
    exceeds it and no equal-valued neighbour precedes it in (n, theta)
    order, which keeps exactly one representative per plateau.  Ties in
    the output ordering break toward earlier n, then lower theta.
    """
    v = rmap.values
    sep_n = int(min_separation[0])
    sep_t = max(1, int(round(min_separation[1] / rmap.grid.theta_step)))
    footprint = (2 * sep_n + 1, 2 * sep_t + 1)
    local_max = ndimage.maximum_filter(v, size=footprint, mode="constant")
    cand = np.argwhere((v >= min_prominence) & (v == local_max))

    peaks = []
    c_per_sample = rmap.grid.c / rmap.grid.fs
    for n, t in cand:
        n0, n1 = max(n - sep_n, 0), min(n + sep_n + 1, v.shape[0])
        t0, t1 = max(t - sep_t, 0), min(t + sep_t + 1, v.shape[1])
        block = v[n0:n1, t0:t1]
        eq = np.argwhere(block == v[n, t])
        eq[:, 0] += n0
        eq[:, 1] += t0
        first = min(map(tuple, eq))
        if first != (n, t):
            continue
        peaks.append(PeakCandidate(
            n=int(n), theta_index=int(t),
            rho=float(n * c_per_sample),
            theta=float(t * rmap.grid.theta_step),
            amplitude=float(v[n, t])))
    peaks.sort(key=lambda p: (-p.amplitude, p.n, p.theta_index))
    return peaks


def mic_prior_mask(
    rmap_grid, constraints: RoomConstraints, config: EstimatorConfig,
) -> np.ndarray:
    """Cells where a direct-path peak could plausibly sit."""
    rho = rmap_grid.radii()[:, None]
    th = np.radians(rmap_grid.thetas())[None, :]
    x = rho * np.cos(th)
    y = rho * np.sin(th)
    slack = config.mic_window_slack
    side_max = max(constraints.right[1], constraints.left[1])
    rho_hi = math.hypot(side_max - constraints.mic_clearance,
                        constraints.front[1] - constraints.mic_clearance)
    dx = np.maximum(np.abs(x) - constraints.array_half_length, 0.0)
    array_dist = np.hypot(dx, y)
    return (
        (rho[:, 0][:, None] >= constraints.mic_clearance - slack)
        & (rho[:, 0][:, None] <= rho_hi + slack)
        & (y > 1e-6)
        & (np.abs(x) <= side_max - constraints.mic_clearance + slack)
        & (np.abs(y) <= constraints.front[1] - constraints.mic_clearance + slack)
        & (array_dist >= constraints.mic_clearance - slack)
    )


def _wall_candidate(mic_xy, img_x, img_y):
    """Mirror-plane parameters for every candidate image position."""
    dx = mic_xy[0] - img_x
    dy = mic_xy[1] - img_y
    gap = np.hypot(dx, dy)
    ok = gap > EPS_DEGENERATE
    safe = np.where(ok, gap, 1.0)
    vx, vy = dx / safe, dy / safe
    d = -0.5 * (vx * (mic_xy[0] + img_x) + vy * (mic_xy[1] + img_y))
    return ok, vx, vy, d


def build_prior_regions(
    grid,
    constraints: RoomConstraints,
    mic_pp: geo.PolarPoint,
    config: EstimatorConfig,
) -> PriorRegions:
    """Wall search masks for a given microphone estimate."""
    rho = grid.radii()[:, None]
    th = np.radians(grid.thetas())[None, :]
    x = rho * np.cos(th)
    y = rho * np.sin(th)
    mic_xy = (mic_pp.rho * math.cos(math.radians(mic_pp.theta)),
              mic_pp.rho * math.sin(math.radians(mic_pp.theta)))

    # the cone is a touch wider than the sampling prior so a wall tilted
    # right at the limit still lands inside after cell quantisation
    cos_max = math.cos(math.radians(
        constraints.orientation_max_deg + config.cone_margin_deg))
    sides: dict[str, np.ndarray] = {}
    branch: dict[str, np.ndarray] = {}
    for name in SIDE_WALLS:
        lo, hi = constraints.bounds(name)
        nv = NOMINAL_NORMALS[name]
        mask = np.zeros(x.shape, dtype=bool)
        chosen = np.zeros(x.shape, dtype=np.int8)
        signs = (-1,) if name == "back" else (
            (1,) if name == "front" else (1, -1))
        for sign in signs:
            ok, vx, vy, d = _wall_candidate(mic_xy, x, sign * y)
            good = (ok & (vx * nv[0] + vy * nv[1] >= cos_max)
                    & (d >= lo) & (d <= hi))
            new = good & ~mask
            chosen[new] = sign
            mask |= good
        sides[name] = mask
        branch[name] = chosen

    # A floor or ceiling image keeps the microphone's x coordinate while
    # gaining height, so its track on the map is the thin ribbon of cells
    # whose apparent x matches the mic, intersected with the radius band
    # reachable from the distance windows.
    pad = config.band_pad
    f_lo, f_hi = constraints.bounds("floor")
    c_lo, c_hi = constraints.bounds("ceiling")
    floor_band = (math.hypot(mic_pp.rho, 2 * f_lo) - pad,
                  math.hypot(mic_pp.rho, 2 * f_hi) + pad)
    ceiling_band = (math.hypot(mic_pp.rho, 2 * c_lo) - pad,
                    math.hypot(mic_pp.rho, 2 * c_hi) + pad)
    band_lo = min(floor_band[0], ceiling_band[0])
    band_hi = max(floor_band[1], ceiling_band[1])
    ribbon = np.abs(x - mic_xy[0]) <= config.fc_x_tol
    fc = (rho >= band_lo) & (rho <= band_hi) & ribbon

    return PriorRegions(
        mic=mic_prior_mask(grid, constraints, config),
        sides=sides, side_branch=branch, fc=fc, ribbon=ribbon,
        floor_band=floor_band, ceiling_band=ceiling_band)


def estimate_labels(
    rmap: RadonMap,
    constraints: RoomConstraints | None = None,
    config: EstimatorConfig | None = None,
    fallback: bool = False,
) -> LabelVector:
    """Estimate the twelve-value label vector from one map.

    With ``fallback`` a wall whose region is empty is replaced by the
    centre of its prior window instead of raising; the direct-path gate
    always raises.
    """
    labels, _ = estimate_labels_verbose(rmap, constraints, config, fallback)
    return labels


def estimate_labels_verbose(
    rmap: RadonMap,
    constraints: RoomConstraints | None = None,
    config: EstimatorConfig | None = None,
    fallback: bool = False,
) -> tuple[LabelVector, dict]:
    """As :func:`estimate_labels`, plus peak choices and fallback flags."""
    constraints = constraints or RoomConstraints()
    config = config or EstimatorConfig()
    grid = rmap.grid
    sep_n = int(config.min_separation[0])
    sep_t = max(1, int(round(config.min_separation[1] / grid.theta_step)))

    peaks = detect_peaks(rmap, config.min_prominence, config.min_separation)
    if not peaks:
        raise MissingDirectPath("map contains no usable peaks")

    def earliest(threshold):
        best = None
        for p in peaks:
            if p.amplitude >= threshold:
                if best is None or (p.n, p.theta_index) < (best.n, best.theta_index):
                    best = p
        return best

    onset = earliest(config.onset_amplitude)
    strong = earliest(config.direct_min_amplitude)
    if onset is None or strong is None:
        raise MissingDirectPath("no peak is strong enough to be a direct path")
    # angular wings of one arrival share its radius, so the gate compares
    # radii only
    if strong.n - onset.n > sep_n:
        raise MissingDirectPath(
            "significant energy precedes the strongest early arrival")
    mic_peak = strong

    # A mic close to the array axis smears its peak onto the theta edge,
    # where the cell itself is infeasible; recover by taking the best
    # feasible cell inside the peak's merge window.
    regions_mic = mic_prior_mask(grid, constraints, config)
    mic_cell = (mic_peak.n, mic_peak.theta_index)
    if not regions_mic[mic_cell]:
        v = rmap.values
        n0 = max(mic_peak.n - sep_n, 0)
        n1 = min(mic_peak.n + sep_n + 1, v.shape[0])
        t0 = max(mic_peak.theta_index - sep_t, 0)
        t1 = min(mic_peak.theta_index + sep_t + 1, v.shape[1])
        window = np.zeros_like(regions_mic)
        window[n0:n1, t0:t1] = True
        feasible = window & regions_mic
        if not feasible.any():
            raise MissingDirectPath(
                "direct-path candidate is outside the feasible microphone window")
        flat = np.where(feasible, v, -1.0)
        mic_cell = np.unravel_index(int(np.argmax(flat)), v.shape)

    mic_pp = geo.PolarPoint(mic_cell[0] * grid.c / grid.fs,
                            mic_cell[1] * grid.theta_step)
    mic_xy = np.array([
        mic_pp.rho * math.cos(math.radians(mic_pp.theta)),
        mic_pp.rho * math.sin(math.radians(mic_pp.theta))])

    regions = build_prior_regions(grid, constraints, mic_pp, config)
    info: dict = {"mic_peak": mic_peak, "fallbacks": [], "peaks": peaks}

    # wall echoes arrive strictly after the direct path; its angular wings
    # share its radius and are skipped along with it
    later = [p for p in peaks if p.n > mic_peak.n + sep_n]

    # Floor/ceiling next.  A wall tilted near zero can drop its echo into
    # the same ribbon, so candidate (floor, ceiling) pairs are scored by
    # the evidence only a true pair leaves: the mirrored double bounces
    # (floor-ceiling and ceiling-floor) land on one shared cell with
    # their amplitudes added, at a radius fixed by the pair's height sum.
    fc_peaks = [p for p in later
                if regions.fc[p.n, p.theta_index]
                and p.amplitude >= config.fc_min_amplitude]
    fc_peaks.sort(key=lambda p: (p.n, p.theta_index))
    claimed = set()
    claim_owner: dict = {}

    def fc_distance(peak):
        gap = max(peak.rho ** 2 - mic_pp.rho ** 2, 0.0)
        return math.sqrt(gap) / 2.0

    def ghost_evidence(height):
        g_rho = math.hypot(mic_pp.rho, 2.0 * height)
        score = 0.0
        for q in later:
            if abs(q.rho - g_rho) > 1.5 * config.lift_tol:
                continue
            qx = q.rho * math.cos(math.radians(q.theta))
            if abs(qx - mic_xy[0]) <= config.fc_x_tol:
                score = max(score, q.amplitude)
        return score if score >= config.fc_ghost_min else 0.0

    f_win = constraints.bounds("floor")
    c_win = constraints.bounds("ceiling")
    slack = 0.08
    cands = fc_peaks[:5]
    best = None
    for i in range(len(cands)):
        d_i = fc_distance(cands[i])
        if not f_win[0] - slack <= d_i <= f_win[1] + slack:
            continue
        for j in range(i + 1, len(cands)):
            d_j = fc_distance(cands[j])
            if not c_win[0] - slack <= d_j <= c_win[1] + slack:
                continue
            if d_j <= d_i or d_i + d_j < constraints.min_height - 0.15:
                continue
            score = ghost_evidence(d_i + d_j)
            if best is None or score > best[0]:
                best = (score, i, j, d_i, d_j)

    def clamp(value, window):
        return min(max(value, window[0]), window[1])

    if best is not None:
        _, i, j, d_i, d_j = best
        d_floor = clamp(d_i, f_win)
        d_ceiling = clamp(d_j, c_win)
        claimed = {(cands[i].n, cands[i].theta_index),
                   (cands[j].n, cands[j].theta_index)}
        claim_owner[(cands[i].n, cands[i].theta_index)] = "floor"
        claim_owner[(cands[j].n, cands[j].theta_index)] = "ceiling"
        info["floor_peak"], info["ceiling_peak"] = cands[i], cands[j]
    elif fc_peaks:
        p = fc_peaks[0]
        d_raw = fc_distance(p)
        d_floor = clamp(d_raw, f_win)
        d_ceiling = clamp(d_raw, c_win)
        claimed = {(p.n, p.theta_index)}
        claim_owner[(p.n, p.theta_index)] = "floor"
        info["floor_peak"] = info["ceiling_peak"] = p
    else:
        if not fallback:
            raise MissingWallPeak(
                "no echo found in the floor/ceiling band", wall="floor")
        d_floor = sum(f_win) / 2.0
        d_ceiling = sum(c_win) / 2.0
        info["fallbacks"] += ["floor", "ceiling"]

    # rooms are never lower than the height prior
    d_ceiling = max(d_ceiling,
                    min(constraints.min_height - d_floor, c_win[1]))

    # Sequences that touch both horizontal surfaces come in z-mirrored
    # twins landing on one cell with their amplitudes added, so they can
    # outshine a true far-wall echo.  Each such ghost sits directly
    # "above" an earlier arrival: same apparent x, radius lifted by a
    # known vertical offset.  Veto candidates that match that pattern.
    h = d_floor + d_ceiling
    lifts = [2 * h, 4 * h, 6 * h,
             2 * h + 2 * d_floor, 2 * h + 2 * d_ceiling,
             4 * h + 2 * d_floor, 4 * h + 2 * d_ceiling]
    base_n = np.array([p.n for p in peaks])
    base_rho = np.array([p.rho for p in peaks])
    base_x = base_rho * np.cos(np.radians([p.theta for p in peaks]))
    base_amp = np.array([p.amplitude for p in peaks])

    def _lift_match(p: PeakCandidate, offsets) -> bool:
        px = p.rho * math.cos(math.radians(p.theta))
        earlier = ((base_n < p.n)
                   & (base_amp >= config.lift_base_min)
                   & (np.abs(base_x - px) <= config.fc_x_tol))
        if not earlier.any():
            return False
        for z in offsets:
            lifted = np.hypot(base_rho[earlier], z)
            if np.any(np.abs(lifted - p.rho) <= config.lift_tol):
                return True
        return False

    def is_lifted(p: PeakCandidate) -> bool:
        """Ghosts from sequences touching both horizontal surfaces sit
        "above" an earlier arrival: same apparent x, radius lifted by a
        known vertical offset, often with doubled amplitude."""
        return _lift_match(p, lifts)

    # Double bounces involving a wall arrive after that wall's own echo,
    # so each wall takes the earliest strong-enough peak in its region.
    # One peak explains one wall, enforced by claiming.
    images = {}
    mic3 = np.array([mic_xy[0], mic_xy[1], 0.0])

    def region_cands(name):
        mask = regions.sides[name]
        return [p for p in later
                if (p.n, p.theta_index) not in claimed
                and mask[p.n, p.theta_index]
                and not is_lifted(p)]

    def cell_image(name, p):
        sign = int(regions.side_branch[name][p.n, p.theta_index])
        th = math.radians(p.theta)
        return np.array([
            p.rho * math.cos(th), sign * p.rho * math.sin(th), 0.0])

    def commit(name, p):
        claimed.add((p.n, p.theta_index))
        claim_owner[(p.n, p.theta_index)] = name
        images[name] = cell_image(name, p)[:2]
        info[f"{name}_peak"] = p

    def simple_pick(cands_w):
        strongest = max(p.amplitude for p in cands_w)
        amp_floor = config.region_floor_frac * strongest
        return min((p for p in cands_w if p.amplitude >= amp_floor),
                   key=lambda p: (p.n, p.theta_index))

    def wall_missing(name):
        if not fallback:
            raise MissingWallPeak(
                f"no echo found in the {name} wall region", wall=name)
        lo, hi = constraints.bounds(name)
        mid = geo.Wall(NOMINAL_NORMALS[name], (lo + hi) / 2.0)
        images[name] = geo.reflect_point(mic3, mid)[:2]
        info["fallbacks"].append(name)

    for name in ("right", "left"):
        cands_w = region_cands(name)
        if cands_w:
            commit(name, simple_pick(cands_w))
        else:
            wall_missing(name)

    # The back and front regions contaminate each other: a cell holds
    # both a -y and a +y reading, and either wall's echo can satisfy the
    # other's window.  Instead of scoring cells in isolation, each
    # candidate (back, front) pair is completed into a full room using
    # the committed side walls and the floor/ceiling heights, and that
    # room's mirror cascade is checked against the map: the true pair
    # predicts the whole ghost ladder, while a ghost promoted to wall
    # status leaves the real echo energy unexplained.  Earlier claims
    # are deliberately ignored here: a winning pair may reclaim a cell
    # another wall grabbed, and that wall then re-picks.
    scored = [q for q in later if q.amplitude >= config.strong_floor]
    s_rho = np.array([q.rho for q in scored])
    s_x = s_rho * np.cos(np.radians([q.theta for q in scored]))
    s_amp = np.array([q.amplitude for q in scored])

    def expand_images(walls):
        """Mirror cascade of the microphone, one bounce per tolerance
        entry, skipping back-to-back repeats of the same plane."""
        found = []
        frontier = [(mic3, -1)]
        for order in range(len(config.order_tols)):
            nxt = []
            for pos, last in frontier:
                for wi, w in enumerate(walls):
                    if wi == last:
                        continue
                    q = geo.reflect_point(pos, w)
                    found.append((math.hypot(q[0], q[1], q[2]),
                                  float(q[0]), order))
                    nxt.append((q, wi))
            frontier = nxt
        return found

    def hypothesis_score(b, f):
        """Detected energy the completed room accounts for.  Candidate
        cells count too: a true pair explains the impostor cells (they
        are its own ghosts), but an impostor room misplaces the real
        first-order echoes and their ladders."""
        try:
            room_h = geo.room_from_labels(LabelVector(
                mic_xy=mic_xy,
                back_xy=cell_image("back", b)[:2],
                right_xy=images["right"],
                front_xy=cell_image("front", f)[:2],
                left_xy=images["left"],
                floor_z=-2.0 * d_floor,
                ceiling_z=2.0 * d_ceiling,
            ))
        except geo.DegenerateImage:
            return -1.0
        # low-order matches are precise and trustworthy, third-order
        # windows are wide enough to catch strays, so credit each peak
        # by the best image that reaches it, tapered toward the window
        # edge: correct predictions land near the centre while chance
        # matches are spread over the whole window
        credit = np.zeros(len(scored))
        for rho_i, x_i, order in expand_images(list(room_h.walls().values())):
            tol = config.order_tols[order]
            drho = np.abs(s_rho - rho_i) / tol
            dx = np.abs(s_x - x_i) / tol
            k = np.where((drho <= 1.0) & (dx <= 1.0),
                         config.order_weights[order]
                         * (1.0 - drho) * (1.0 - dx), 0.0)
            np.maximum(credit, k, out=credit)
        return float((credit * s_amp).sum())

    def joint_cands(name):
        mask = regions.sides[name]
        found = [p for p in later if mask[p.n, p.theta_index]]
        found.sort(key=lambda p: -p.amplitude)
        return found[:config.joint_cap]

    back_c = joint_cands("back")
    front_c = joint_cands("front")
    pair = None
    info["joint"] = []
    if back_c and front_c:
        best = None
        for b in back_c:
            for f in front_c:
                if (f.n, f.theta_index) == (b.n, b.theta_index):
                    continue
                score = hypothesis_score(b, f)
                info["joint"].append((b, f, score))
                key = (-score, b.n, b.theta_index, f.n, f.theta_index)
                if best is None or key < best[0]:
                    best = (key, b, f, score)
        if best is not None and best[3] > 0.0:
            pair = (best[1], best[2])

    stolen = []
    if pair is not None:
        for name, p in zip(("back", "front"), pair):
            owner = claim_owner.get((p.n, p.theta_index))
            if owner in ("right", "left"):
                stolen.append(owner)
        commit("back", pair[0])
        commit("front", pair[1])
    else:
        # no pair left usable double-bounce evidence; fall back to
        # treating the two regions independently
        front_c = region_cands("front")
        if front_c:
            commit("front", simple_pick(front_c))
        else:
            wall_missing("front")
        back_c = region_cands("back")
        if back_c:
            commit("back", simple_pick(back_c))
        else:
            wall_missing("back")

    for name in stolen:
        cands_w = region_cands(name)
        if cands_w:
            commit(name, simple_pick(cands_w))
        else:
            wall_missing(name)

    labels = LabelVector(
        mic_xy=mic_xy,
        back_xy=images["back"],
        right_xy=images["right"],
        front_xy=images["front"],
        left_xy=images["left"],
        floor_z=-2.0 * d_floor,
        ceiling_z=2.0 * d_ceiling,
    )
    return labels, info


def infer_room(labels: LabelVector) -> RoomGeometry:
    """Reconstruct wall planes from an estimated label vector."""
    return geo.room_from_labels(labels)


# ---------------------------------------------------------------------------
# label vector JSON interface (shared with the external trainer)

LABELS_SCHEMA = {
    "type": "object",
    "properties": {
        **{k: {"type": "array", "items": {"type": "number"},
               "minItems": 2, "maxItems": 2}
           for k in ("mic_xy", "back_xy", "right_xy", "front_xy", "left_xy")},
        "floor_z": {"type": "number", "exclusiveMaximum": 0},
        "ceiling_z": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["mic_xy", "back_xy", "right_xy", "front_xy", "left_xy",
                 "floor_z", "ceiling_z"],
    "additionalProperties": False,
}

PREDICTIONS_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"const": "predictions/1"},
        "estimator": {"type": "string"},
        "grid_hash": {"type": "string"},
        "samples": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "labels": LABELS_SCHEMA,
                },
                "required": ["id", "labels"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["format", "estimator", "grid_hash", "samples"],
    "additionalProperties": False,
}


def labels_to_dict(labels: LabelVector) -> dict:
    return {
        "mic_xy": [float(x) for x in labels.mic_xy],
        "back_xy": [float(x) for x in labels.back_xy],
        "right_xy": [float(x) for x in labels.right_xy],
        "front_xy": [float(x) for x in labels.front_xy],
        "left_xy": [float(x) for x in labels.left_xy],
        "floor_z": float(labels.floor_z),
        "ceiling_z": float(labels.ceiling_z),
    }


def labels_from_dict(d: dict) -> LabelVector:
    try:
        return LabelVector(
            mic_xy=d["mic_xy"], back_xy=d["back_xy"], right_xy=d["right_xy"],
            front_xy=d["front_xy"], left_xy=d["left_xy"],
            floor_z=d["floor_z"], ceiling_z=d["ceiling_z"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad label object: {exc}") from exc


def validate_predictions(doc: dict) -> None:
    """Schema-check a predictions document; raises on violations."""
    import jsonschema

    try:
        jsonschema.validate(doc, PREDICTIONS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidFileFormat(
            f"predictions document rejected: {exc.message}") from exc


def write_predictions(
    path, items: list[tuple[str, LabelVector]],
    estimator: str, grid_hash: str,
) -> None:
    """Atomically write one predictions file covering a whole split."""
    doc = {
        "format": "predictions/1",
        "estimator": estimator,
        "grid_hash": grid_hash,
        "samples": [{"id": sid, "labels": labels_to_dict(lv)}
                    for sid, lv in items],
    }
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_predictions(path) -> tuple[dict, dict[str, LabelVector]]:
    """Load and validate a predictions file.

    Returns (metadata, id -> labels) with metadata holding the estimator
    name and grid hash.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidFileFormat(f"not a JSON document: {exc}") from exc
    validate_predictions(doc)
    meta = {"estimator": doc["estimator"], "grid_hash": doc["grid_hash"]}
    out = {}
    for entry in doc["samples"]:
        out[entry["id"]] = labels_from_dict(entry["labels"])
    return meta, out
