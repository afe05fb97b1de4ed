"""Estimator tests.

Synthetic maps with hand-placed arrivals pin down the decision logic
cheaply; a handful of fully simulated rooms cover the end-to-end path.
The 50-room accuracy criterion lives in the acceptance suite.
"""

import math

import numpy as np
import pytest

from roomgeo import estimator as est
from roomgeo import geometry as g
from roomgeo import radon
from roomgeo import simulator as sim
from roomgeo.errors import (
    InvalidFileFormat,
    MissingDirectPath,
    MissingWallPeak,
)
from roomgeo.metrics import room_error

GRID = radon.RadonGrid()
CPS = GRID.c / GRID.fs
CONS = g.RoomConstraints()
ULA = sim.ULAConfig()
PARAMS = sim.SimParams()

# An axis-aligned room whose echo map is painted by hand.  Distances are
# plane offsets from the array centre, all inside the sampling windows.
BOX = dict(back=0.6, right=2.0, front=4.0, left=2.2, floor=1.2, ceiling=2.4)
MIC = (0.4, 1.3)


@pytest.fixture(scope="module")
def steering():
    return radon.build_steering(ULA, GRID)


def box_images(box=BOX, mic=MIC):
    """First-order mic images of the box, plus the floor+ceiling double
    bounce the floor/ceiling pair scorer looks for."""
    x0, y0 = mic
    return {
        "direct": (x0, y0, 0.0),
        "back": (x0, -2 * box["back"] - y0, 0.0),
        "front": (x0, 2 * box["front"] - y0, 0.0),
        "right": (2 * box["right"] - x0, y0, 0.0),
        "left": (-2 * box["left"] - x0, y0, 0.0),
        "floor": (x0, y0, -2 * box["floor"]),
        "ceiling": (x0, y0, 2 * box["ceiling"]),
        "fc_ghost": (x0, y0, 2 * (box["floor"] + box["ceiling"])),
    }


AMPS = {"direct": 1.0, "back": 0.62, "right": 0.66, "front": 0.58,
        "left": 0.6, "floor": 0.72, "ceiling": 0.55, "fc_ghost": 0.5}


def paint(images, amps, grid=GRID):
    """Render arrivals as small Gaussian bumps and normalise to max 1."""
    v = np.zeros((grid.num_radii, grid.theta_count))
    for name, pos in images.items():
        a = amps.get(name, 0.0)
        if a <= 0:
            continue
        pp = g.polar_projection(np.asarray(pos, dtype=float))
        n0 = pp.rho * grid.fs / grid.c
        t0 = pp.theta / grid.theta_step
        for n in range(max(int(n0) - 8, 0), min(int(n0) + 9, grid.num_radii)):
            for t in range(max(int(t0) - 4, 0),
                           min(int(t0) + 5, grid.theta_count)):
                v[n, t] += a * math.exp(
                    -0.5 * (((n - n0) / 2.5) ** 2 + ((t - t0) / 1.1) ** 2))
    v /= v.max()
    return radon.RadonMap(v, grid)


def box_truth(box=BOX, mic=MIC):
    imgs = box_images(box, mic)
    labels = g.LabelVector(
        mic_xy=np.array(mic),
        back_xy=np.array(imgs["back"][:2]),
        right_xy=np.array(imgs["right"][:2]),
        front_xy=np.array(imgs["front"][:2]),
        left_xy=np.array(imgs["left"][:2]),
        floor_z=-2 * box["floor"],
        ceiling_z=2 * box["ceiling"])
    return g.room_from_labels(labels)


# ------------------------------------------------------------ peak picking

def test_detect_peaks_two_isolated_bumps():
    v = np.zeros((200, 181))
    v[50, 90] = 1.0
    v[120, 40] = 0.4
    rmap = radon.RadonMap(np.pad(v, ((0, GRID.num_radii - 200), (0, 0))), GRID)
    peaks = est.detect_peaks(rmap)
    assert [(p.n, p.theta_index) for p in peaks] == [(50, 90), (120, 40)]
    assert peaks[0].amplitude == 1.0
    assert peaks[0].rho == pytest.approx(50 * CPS)
    assert peaks[0].theta == pytest.approx(90.0)


def test_detect_peaks_plateau_keeps_one_cell():
    v = np.zeros((GRID.num_radii, GRID.theta_count))
    v[60:62, 100:102] = 0.8  # 2 x 2 flat top
    peaks = est.detect_peaks(radon.RadonMap(v, GRID))
    assert [(p.n, p.theta_index) for p in peaks] == [(60, 100)]


def test_detect_peaks_separation_suppresses_shoulder():
    v = np.zeros((GRID.num_radii, GRID.theta_count))
    v[100, 90] = 1.0
    v[105, 91] = 0.9   # inside the (8, 3 deg) window: swallowed
    v[100, 96] = 0.85  # 6 degrees away: separate arrival
    peaks = est.detect_peaks(radon.RadonMap(v, GRID))
    assert [(p.n, p.theta_index) for p in peaks] == [(100, 90), (100, 96)]


def test_detect_peaks_prominence_floor():
    v = np.zeros((GRID.num_radii, GRID.theta_count))
    v[100, 90] = 1.0
    v[500, 90] = 0.04
    peaks = est.detect_peaks(radon.RadonMap(v, GRID), min_prominence=0.05)
    assert len(peaks) == 1


# ------------------------------------------------------------ prior regions

def test_regions_admit_every_sampled_truth():
    """Each true first-order image cell must fall inside its wall's search
    region, and the floor/ceiling cells inside the ribbon band."""
    config = est.EstimatorConfig()
    for seed in range(40):
        room, mic, alphas = g.sample_room(CONS, seed=seed)
        labels = g.labels_from_room(room, mic)
        mp = g.polar_projection(np.array([*labels.mic_xy, 0.0]))
        qpp = g.PolarPoint(round(mp.rho / CPS) * CPS,
                           round(mp.theta / GRID.theta_step) * GRID.theta_step)
        regions = est.build_prior_regions(GRID, CONS, qpp, config)
        assert regions.mic[round(mp.rho / CPS),
                           round(mp.theta / GRID.theta_step)]
        for name in g.SIDE_WALLS:
            img = labels.image_xy(name)
            pp = g.polar_projection(np.array([*img, 0.0]))
            n = round(pp.rho / CPS)
            t = round(pp.theta / GRID.theta_step)
            assert regions.sides[name][n, t], (seed, name)
            # quantisation moves the implied image by at most a cell in
            # radius and half a degree in angle
            sign = -1.0 if img[1] < 0 else 1.0
            th = math.radians(t * GRID.theta_step)
            recon = np.array([n * CPS * math.cos(th),
                              sign * n * CPS * math.sin(th)])
            assert np.linalg.norm(recon - img) < 0.15, (seed, name)
            if name == "back":
                assert regions.side_branch[name][n, t] == -1
            if name == "front":
                assert regions.side_branch[name][n, t] == 1
        for zoff in (-2 * room.d_floor, 2 * room.d_ceiling):
            pp = g.polar_projection(np.array([*labels.mic_xy, zoff]))
            assert regions.fc[round(pp.rho / CPS),
                              round(pp.theta / GRID.theta_step)], seed


def test_mic_mask_excludes_infeasible_cells():
    mask = est.mic_prior_mask(GRID, CONS, est.EstimatorConfig())
    assert not mask[:, 0].any()        # theta = 0 means y = 0: no room there
    assert not mask[:40, :].any()      # closer than the clearance
    pp = g.polar_projection(np.array([0.4, 1.3, 0.0]))
    assert mask[round(pp.rho / CPS), round(pp.theta / GRID.theta_step)]


# ------------------------------------------------------------ synthetic box

def test_box_estimate_matches_truth():
    rmap = paint(box_images(), AMPS)
    labels, info = est.estimate_labels_verbose(rmap, CONS)
    cmp = room_error(box_truth(), g.room_from_labels(labels))
    assert np.linalg.norm(labels.mic_xy - np.array(MIC)) < 0.02
    for name, we in cmp.walls.items():
        assert we.eps_d < 0.02, (name, we)
        assert we.eps_theta < 1.0, (name, we)
    assert cmp.room.e_d < 0.01
    assert info["fallbacks"] == []
    # the painted ghost and the in-ribbon back echo were not mistaken for
    # floor or ceiling
    assert info["floor_peak"].n != info["ceiling_peak"].n
    d_floor = -labels.floor_z / 2
    d_ceiling = labels.ceiling_z / 2
    assert d_floor == pytest.approx(BOX["floor"], abs=0.02)
    assert d_ceiling == pytest.approx(BOX["ceiling"], abs=0.02)


def test_box_estimate_is_deterministic():
    rmap = paint(box_images(), AMPS)
    a = est.estimate_labels(rmap, CONS)
    b = est.estimate_labels(rmap, CONS)
    assert np.array_equal(a.to_array(), b.to_array())


def test_missing_direct_raises():
    # energy well ahead of the strongest arrival: a direct path this weak
    # means the measurement is unusable (0.25 / 0.72 after normalisation
    # sits in the onset band but below the direct-path floor)
    amps = dict(AMPS, direct=0.25)
    rmap = paint(box_images(), amps)
    with pytest.raises(MissingDirectPath):
        est.estimate_labels(rmap, CONS)


def test_empty_map_raises():
    v = np.zeros((GRID.num_radii, GRID.theta_count))
    with pytest.raises(MissingDirectPath):
        est.estimate_labels(radon.RadonMap(v, GRID), CONS)


def test_direct_only_below_gate_raises():
    v = np.zeros((GRID.num_radii, GRID.theta_count))
    pp = g.polar_projection(np.array([0.4, 1.3, 0.0]))
    v[round(pp.rho / CPS), round(pp.theta / GRID.theta_step)] = 0.35
    v[900, 90] = 1.0  # dominant late energy, nothing strong early
    with pytest.raises(MissingDirectPath):
        est.estimate_labels(radon.RadonMap(v, GRID), CONS)


def test_mic_on_theta_edge_recovers():
    # a mic nearly on the array axis quantises to theta = 0 where no room
    # can exist; the estimator slides to the best feasible neighbour
    mic = (1.3, 0.008)
    rmap = paint(box_images(mic=mic), AMPS)
    labels = est.estimate_labels(rmap, CONS)
    assert labels.mic_xy[1] > 0
    assert np.linalg.norm(labels.mic_xy - np.array(mic)) < 0.05


def test_mic_inside_clearance_raises():
    mic = (0.2, 0.1)  # too close to the array for any sampled room
    rmap = paint(box_images(mic=mic), AMPS)
    with pytest.raises(MissingDirectPath):
        est.estimate_labels(rmap, CONS)


def test_missing_wall_raises_and_names_the_wall():
    amps = dict(AMPS, left=0.0)
    rmap = paint(box_images(), amps)
    with pytest.raises(MissingWallPeak) as exc:
        est.estimate_labels(rmap, CONS)
    assert exc.value.wall == "left"


def test_missing_wall_fallback_uses_window_midpoint():
    amps = dict(AMPS, left=0.0)
    rmap = paint(box_images(), amps)
    labels, info = est.estimate_labels_verbose(rmap, CONS, fallback=True)
    assert "left" in info["fallbacks"]
    lo, hi = CONS.bounds("left")
    mid = (lo + hi) / 2
    # image of the estimated mic over the plane x = -mid
    assert labels.left_xy[0] == pytest.approx(-2 * mid - labels.mic_xy[0],
                                              abs=1e-9)
    # the other walls are unaffected
    cmp = room_error(box_truth(), g.room_from_labels(labels))
    assert cmp.walls["right"].eps_d < 0.02
    assert cmp.walls["front"].eps_d < 0.02


def test_ghost_promoted_when_true_echo_absent():
    # with the front echo erased, the region still holds the painted
    # floor+ceiling ghost; with nothing to contradict it the estimator
    # reads it as the front wall rather than failing
    amps = dict(AMPS, front=0.0)
    rmap = paint(box_images(), amps)
    labels, info = est.estimate_labels_verbose(rmap, CONS, fallback=True)
    assert "front" not in info["fallbacks"]


# ------------------------------------------------------------ simulated rooms

def test_simulated_rooms_end_to_end(steering):
    errs = []
    for seed in (1, 3, 7, 13):
        room, mic, alphas = g.sample_room(CONS, seed=seed)
        rirs = sim.simulate_rirs(room, mic, ULA, alphas, PARAMS)
        rmap = radon.radon_map(rirs, ULA, GRID, steering=steering)
        labels, info = est.estimate_labels_verbose(rmap, CONS)
        cmp = room_error(room, g.room_from_labels(labels))
        assert info["fallbacks"] == []
        assert cmp.room.e_d < 0.10, seed
        errs.append(cmp.room.e_d)
    assert np.mean(errs) < 0.05


def test_infer_room_round_trip():
    room, mic, alphas = g.sample_room(CONS, seed=5)
    labels = g.labels_from_room(room, mic)
    back = est.infer_room(labels)
    cmp = room_error(room, back)
    assert cmp.room.e_d < 1e-9
    assert cmp.room.e_theta < 1e-7


# ------------------------------------------------------------ JSON interface

def test_labels_dict_round_trip():
    room, mic, alphas = g.sample_room(CONS, seed=2)
    labels = g.labels_from_room(room, mic)
    again = est.labels_from_dict(est.labels_to_dict(labels))
    assert np.allclose(labels.to_array(), again.to_array(), atol=0)


def test_labels_from_dict_rejects_bad_shapes():
    d = est.labels_to_dict(g.labels_from_room(*g.sample_room(CONS, seed=2)[:2]))
    d["mic_xy"] = [1.0, 2.0, 3.0]
    with pytest.raises(InvalidFileFormat):
        est.labels_from_dict(d)
    d2 = est.labels_to_dict(g.labels_from_room(*g.sample_room(CONS, seed=2)[:2]))
    del d2["floor_z"]
    with pytest.raises(InvalidFileFormat):
        est.labels_from_dict(d2)


def test_predictions_file_round_trip(tmp_path):
    room, mic, alphas = g.sample_room(CONS, seed=4)
    labels = g.labels_from_room(room, mic)
    path = tmp_path / "pred.json"
    est.write_predictions(path, [("test-000000", labels)],
                          estimator="classical", grid_hash=GRID.fingerprint())
    meta, loaded = est.read_predictions(path)
    assert meta["estimator"] == "classical"
    assert meta["grid_hash"] == GRID.fingerprint()
    assert set(loaded) == {"test-000000"}
    assert np.allclose(loaded["test-000000"].to_array(), labels.to_array())
    # writing again produces identical bytes: stable key order and layout
    before = path.read_bytes()
    est.write_predictions(path, [("test-000000", labels)],
                          estimator="classical", grid_hash=GRID.fingerprint())
    assert path.read_bytes() == before


def test_predictions_schema_rejects_extras(tmp_path):
    room, mic, alphas = g.sample_room(CONS, seed=4)
    labels = g.labels_from_room(room, mic)
    doc = {
        "format": "predictions/1",
        "estimator": "x", "grid_hash": "y",
        "samples": [{"id": "a", "labels": est.labels_to_dict(labels),
                     "extra": 1}],
    }
    with pytest.raises(InvalidFileFormat):
        est.validate_predictions(doc)
    doc["samples"][0].pop("extra")
    est.validate_predictions(doc)


def test_read_predictions_rejects_malformed_json(tmp_path):
    path = tmp_path / "pred.json"
    path.write_text("{not json")
    with pytest.raises(InvalidFileFormat):
        est.read_predictions(path)
