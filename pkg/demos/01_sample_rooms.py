"""Draw a few random rooms and look at what the sampler produces.

Rooms are convex quadrilaterals in plan view: four walls at randomly
tilted orientations around their nominal axes, plus a floor below and a
ceiling above the array plane.  The array sits at the origin looking
along +y; the microphone lands anywhere in the interior with half a
metre of clearance.  Writes one floor plan SVG per room to demos/out/.
"""

import pathlib

import numpy as np

import roomgeo
from roomgeo.cli import _floorplan_svg

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cons = roomgeo.RoomConstraints()
print(f"distance windows: back {cons.back}, right {cons.right}, "
      f"front {cons.front}, left {cons.left}")
print(f"floor {cons.floor}, ceiling {cons.ceiling}, "
      f"tilt up to {cons.orientation_max_deg} deg\n")

for seed in range(4):
    room, mic, alphas = roomgeo.sample_room(cons, seed=seed)
    labels = roomgeo.labels_from_room(room, mic)
    corners = room.corners()
    area = 0.5 * abs(float(np.cross(corners[1] - corners[0],
                                    corners[2] - corners[0]))
                     + float(np.cross(corners[2] - corners[0],
                                      corners[3] - corners[0])))
    print(f"room seed {seed}")
    for name, wall in room.side_walls().items():
        tilt = np.degrees(np.arctan2(wall.v[0], wall.v[1]))
        print(f"  {name:<8} d = {wall.d:5.2f} m   normal ({wall.v[0]:+.3f}, "
              f"{wall.v[1]:+.3f})  tilt {tilt:+6.1f} deg")
    print(f"  height {room.height:.2f} m "
          f"(floor {room.d_floor:.2f} below, ceiling {room.d_ceiling:.2f} above)")
    print(f"  mic at ({mic.r_o[0]:+.2f}, {mic.r_o[1]:.2f}), "
          f"plan area {area:.1f} m^2")
    print(f"  absorptions {np.array2string(alphas, precision=2)}")

    svg = _floorplan_svg(room, np.array(labels.mic_xy), None,
                         roomgeo.ULAConfig().half_length)
    path = OUT / f"room_{seed}.svg"
    path.write_text(svg)
    print(f"  wrote {path}\n")

print("same thing from the command line:")
print("  roomgeo sample-rooms --count 4 --seed 0 --out rooms.json")
print("  roomgeo export-floorplan --rooms rooms.json --out room.svg")
