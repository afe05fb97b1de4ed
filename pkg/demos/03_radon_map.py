"""Turn an impulse response set into the polar map the estimator reads.

Every map cell steers the array to one (radius, angle) point by summing
all channels at the per-channel delays matching that point, after
half-wave rectification.  Coherent arrivals pile up into bright blobs at
the polar positions of the microphone and its mirror images; everything
else averages away.  Writes the map container plus a PGM you can open
in any image viewer (rows are radius, columns angle).
"""

import pathlib

import numpy as np

import roomgeo

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

room, mic, alphas = roomgeo.sample_room(roomgeo.RoomConstraints(), seed=3)
rir_path = OUT / "rirs_seed3.bin"
if rir_path.exists():
    rirs = roomgeo.read_rir_set(rir_path)
    print(f"re-using {rir_path}")
else:
    rirs = roomgeo.simulate_rirs(room, mic, roomgeo.ULAConfig(), alphas,
                                 roomgeo.SimParams())
    print("simulated the seed-3 room fresh (run 02 first to re-use it)")

grid = roomgeo.RadonGrid()
print(f"grid: {grid.num_radii} radii x {grid.theta_count} angles, "
      f"cell {100 * grid.c / grid.fs:.2f} cm deep")
rmap = roomgeo.radon_map(rirs, roomgeo.ULAConfig(), grid)

# the map is weighted by path length, so the global maximum is usually a
# far reflection; the mic still shows as a clean blob at its own cell
pp = roomgeo.polar_projection(mic.r_o)
n = round(pp.rho * grid.fs / grid.c)
t = round(pp.theta / grid.theta_step)
print(f"mic cell ({pp.rho:.2f} m, {pp.theta:.0f} deg): "
      f"value {rmap.values[n, t]:.2f} of the map maximum")
bn, bt = np.unravel_index(int(np.argmax(rmap.values)), rmap.values.shape)
print(f"brightest cell: radius {grid.radii()[bn]:.2f} m, "
      f"angle {grid.thetas()[bt]:.0f} deg (a far, strongly weighted echo)")
strong = int((rmap.values > 0.3).sum())
print(f"{strong} cells above 0.3 of the maximum")

roomgeo.write_map(OUT / "map_seed3.bin", rmap)
from roomgeo.radon import write_map_pgm
write_map_pgm(OUT / "map_seed3.pgm", rmap)
print(f"wrote {OUT / 'map_seed3.bin'} and {OUT / 'map_seed3.pgm'}")
print("command line equivalent: roomgeo radon --rirs rirs.bin "
      "--out map.bin --pgm map.pgm")
