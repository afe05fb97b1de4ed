"""Radon map tests.

Small grids keep the pure-Python reference affordable here; the full-size
equivalence run lives in the acceptance suite.
"""

import numpy as np
import pytest

from roomgeo import geometry as g
from roomgeo import radon
from roomgeo import simulator as sim
from roomgeo.errors import GridMismatch, InvalidFileFormat


# rho_max kept exactly representable in float32 so container round trips
# reproduce the grid without quantisation
SMALL = radon.RadonGrid(rho_max=1.25, fs=16_000, c=343.0, theta_step=9.0)


def small_rirs(rng, channels=3, length=None, fs=16_000):
    length = length or SMALL.num_radii + 30
    h = rng.normal(size=(channels, length))
    return sim.RIRSet(h, fs)


# ------------------------------------------------------------ grid

def test_grid_radii_and_thetas():
    grid = radon.RadonGrid(rho_max=15.0, fs=48_000, c=343.0, theta_step=1.0)
    assert grid.num_radii == 2099
    assert grid.theta_count == 181
    r = grid.radii()
    assert r[0] == 0.0
    assert r[1] == pytest.approx(343.0 / 48_000)
    assert r[-1] <= 15.0
    t = grid.thetas()
    assert t[0] == 0.0 and t[-1] == 180.0
    assert len(t) == 181


def test_grid_validation():
    with pytest.raises(ValueError):
        radon.RadonGrid(theta_step=7.0)  # does not divide 180
    with pytest.raises(ValueError):
        radon.RadonGrid(rho_max=-1)


def test_grid_fingerprint_distinguishes():
    a = radon.RadonGrid()
    b = radon.RadonGrid(theta_step=2.0)
    assert a.fingerprint() == radon.RadonGrid().fingerprint()
    assert a.fingerprint() != b.fingerprint()


# ------------------------------------------------------------ steering

def test_steering_single_speaker_at_origin():
    ula = sim.ULAConfig(num_speakers=1, spacing=0.06)
    st = radon.build_steering(ula, SMALL)
    # distance equals the cell radius, delay identically zero
    assert np.allclose(st.dist[:, :, 0], SMALL.radii()[:, None], atol=1e-12)
    assert np.allclose(st.delay, 0.0, atol=1e-9)


def test_steering_known_offsets():
    # speaker at x = 0.36 against the cell at rho = 1, theta = 90:
    # dist = sqrt(1 + 0.36^2), delay = (fs / c)(1 - dist)
    grid = radon.RadonGrid(rho_max=1.5, fs=48_000, c=343.0, theta_step=90.0)
    ula = sim.ULAConfig(num_speakers=13, spacing=0.06)
    st = radon.build_steering(ula, grid)
    n = int(round(1.0 * grid.fs / grid.c))  # cell nearest rho = 1
    rho_n = n * grid.c / grid.fs
    want = np.sqrt(rho_n ** 2 + 0.36 ** 2)
    assert st.dist[n, 1, 12] == pytest.approx(want, abs=1e-12)
    assert st.delay[n, 1, 12] == pytest.approx(
        grid.fs / grid.c * (rho_n - want), abs=1e-9)
    # theta = 0 is collinear with the array: dist = |rho - x_m|
    assert st.dist[n, 0, 12] == pytest.approx(abs(rho_n - 0.36), abs=1e-12)


def test_steering_reads_land_on_path_distance():
    # n - delay must equal (fs / c) dist for every cell
    ula = sim.ULAConfig(num_speakers=5)
    st = radon.build_steering(ula, SMALL)
    n_idx = np.arange(SMALL.num_radii, dtype=float)[:, None, None]
    reads = n_idx - st.delay
    assert np.allclose(reads, SMALL.fs / SMALL.c * st.dist, atol=1e-9)


# ------------------------------------------------------------ map properties

def test_map_of_zeros_stays_zero():
    ula = sim.ULAConfig(num_speakers=3)
    rirs = sim.RIRSet(np.zeros((3, 90)), SMALL.fs)
    m = radon.radon_map(rirs, ula, SMALL)
    assert np.all(m.values == 0.0)


def test_map_single_channel_impulse_ridge():
    # one channel, speaker at the origin: an impulse at sample k lights the
    # whole row n = k after d-weighting and normalisation
    ula = sim.ULAConfig(num_speakers=1)
    h = np.zeros((1, 80))
    h[0, 30] = 1.0
    m = radon.radon_map(sim.RIRSet(h, SMALL.fs), ula, SMALL)
    assert np.allclose(m.values[30], 1.0)
    # neighbouring rows may pick up interpolation leakage at the float
    # rounding scale, nothing more
    others = np.delete(m.values, 30, axis=0)
    assert np.max(others) < 1e-9


def test_map_non_negative_and_normalised():
    rng = np.random.default_rng(4)
    ula = sim.ULAConfig(num_speakers=3)
    m = radon.radon_map(small_rirs(rng), ula, SMALL)
    assert np.all(m.values >= 0.0)
    assert m.values.max() == pytest.approx(1.0)


def test_map_scaling_invariance():
    rng = np.random.default_rng(5)
    ula = sim.ULAConfig(num_speakers=3)
    rirs = small_rirs(rng)
    m1 = radon.radon_map(rirs, ula, SMALL)
    m2 = radon.radon_map(sim.RIRSet(rirs.channels * 7.3, rirs.fs), ula, SMALL)
    assert np.allclose(m1.values, m2.values, atol=1e-12)


def test_map_mirror_equivariance():
    # reversing channel order mirrors the map about theta = 90
    rng = np.random.default_rng(6)
    ula = sim.ULAConfig(num_speakers=5)
    rirs = small_rirs(rng, channels=5)
    m1 = radon.radon_map(rirs, ula, SMALL)
    m2 = radon.radon_map(sim.RIRSet(rirs.channels[::-1], rirs.fs), ula, SMALL)
    assert np.allclose(m1.values, m2.values[:, ::-1], atol=1e-12)


def test_map_negative_samples_ignored():
    ula = sim.ULAConfig(num_speakers=1)
    h = np.zeros((1, 80))
    h[0, 25] = -5.0
    h[0, 40] = 2.0
    m = radon.radon_map(sim.RIRSet(h, SMALL.fs), ula, SMALL)
    assert np.all(m.values[25] == 0.0)
    assert np.allclose(m.values[40], 1.0)


def test_map_grid_mismatch():
    ula = sim.ULAConfig(num_speakers=3)
    rirs = sim.RIRSet(np.zeros((3, 90)), 44_100)
    with pytest.raises(GridMismatch):
        radon.radon_map(rirs, ula, SMALL)
    with pytest.raises(GridMismatch):
        radon.radon_map(sim.RIRSet(np.zeros((4, 90)), SMALL.fs), ula, SMALL)
    st = radon.build_steering(sim.ULAConfig(num_speakers=3), SMALL)
    other = radon.RadonGrid(rho_max=1.2, fs=16_000, c=343.0, theta_step=18.0)
    with pytest.raises(GridMismatch):
        radon.radon_map(sim.RIRSet(np.zeros((3, 90)), SMALL.fs),
                        sim.ULAConfig(num_speakers=3), other, steering=st)


def test_optimised_matches_reference_small():
    rng = np.random.default_rng(8)
    ula = sim.ULAConfig(num_speakers=3)
    for _ in range(3):
        rirs = small_rirs(rng)
        fast = radon.radon_map(rirs, ula, SMALL)
        slow = radon.radon_map_reference(rirs, ula, SMALL)
        assert np.allclose(fast.values, slow.values, rtol=1e-9, atol=1e-12)


def test_point_image_peaks_at_its_cell():
    # a single image synthesized across all channels focuses at its polar cell
    grid = radon.RadonGrid(rho_max=3.0, fs=48_000, c=343.0, theta_step=1.0)
    ula = sim.ULAConfig()
    params = sim.SimParams(duration_samples=grid.num_radii + 60)
    point = np.array([0.9, 1.7, 0.0])
    channels = [
        sim.synthesize_rir(
            [sim.ImageSource(point, 1.0, 0, ())], s_m, params)
        for s_m in ula.positions()
    ]
    m = radon.radon_map(sim.RIRSet(np.stack(channels), params.fs), ula, grid)
    n, t = np.unravel_index(np.argmax(m.values), m.values.shape)
    pp = g.polar_projection(point)
    assert abs(n * grid.c / grid.fs - pp.rho) <= 1.5 * grid.c / grid.fs
    assert abs(t * grid.theta_step - pp.theta) <= 1.5 * grid.theta_step


# ------------------------------------------------------------ exports

def ridge_map():
    rng = np.random.default_rng(10)
    ula = sim.ULAConfig(num_speakers=3)
    return radon.radon_map(small_rirs(rng), ula, SMALL)


def test_binary_round_trip_bit_exact(tmp_path):
    m = ridge_map()
    p1 = tmp_path / "m1.rtm"
    radon.write_map(p1, m)
    back = radon.read_map(p1)
    p2 = tmp_path / "m2.rtm"
    radon.write_map(p2, back)
    assert p1.read_bytes() == p2.read_bytes()
    assert back.grid == m.grid
    assert np.allclose(back.values, m.values, atol=1e-7)


def test_binary_rejects_garbage(tmp_path):
    p = tmp_path / "bad.rtm"
    p.write_bytes(b"\x00" * 40)
    with pytest.raises(InvalidFileFormat):
        radon.read_map(p)
    m = ridge_map()
    raw = radon.map_record_bytes(m)
    with pytest.raises(InvalidFileFormat):
        radon.map_from_bytes(raw[:-8])


def test_pgm_export(tmp_path):
    m = ridge_map()
    p = tmp_path / "m.pgm"
    radon.write_map_pgm(p, m)
    raw = p.read_bytes()
    header, rest = raw.split(b"\n", 1)
    assert header == b"P5"
    dims, rest = rest.split(b"\n", 1)
    w, h = map(int, dims.split())
    assert (w, h) == (m.grid.theta_count, m.grid.num_radii)
    maxval, pix = rest.split(b"\n", 1)
    assert maxval == b"65535"
    data = np.frombuffer(pix, dtype=">u2").reshape(h, w)
    assert data.max() == 65535  # normalised map peaks at full scale
    n, t = np.unravel_index(np.argmax(m.values), m.values.shape)
    assert data[n, t] == 65535


def test_csv_export(tmp_path):
    m = ridge_map()
    p = tmp_path / "m.csv"
    radon.write_map_csv(p, m)
    lines = p.read_text().splitlines()
    assert len(lines) == m.grid.num_radii + 1
    header = lines[0].split(",")
    assert header[1] == "0" and header[-1] == "180"
    assert lines[5].split(",")[0] == "4"
    row = np.array([float(x) for x in lines[5].split(",")[1:]])
    assert np.allclose(row, m.values[4], atol=1e-8)
