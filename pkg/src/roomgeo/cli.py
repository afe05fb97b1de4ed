"""Command line front end for the room inference toolkit.

Each subcommand is a thin composition of library calls with file inputs
and outputs, so whole pipelines are reproducible from a seed and a
config file.  Settings resolve flag over config file over built-in
default.  Failures print a one-line JSON object to stderr and exit
nonzero; output files are written atomically (temp file plus rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import estimator as est
from . import geometry as geo
from . import metrics
from . import radon
from . import simulator as sim
from .errors import InvalidFileFormat, RoomGeoError

DESK_COUNTS = {"train": 500, "val": 100, "test": 100}
PAPER_COUNTS = {"train": 50_000, "val": 5_000, "test": 5_000}


# ---------------------------------------------------------------------------
# config plumbing

def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidFileFormat(f"config is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidFileFormat("config must be a JSON object")
    return doc


def _from_section(cls, doc, coerce_tuples=()):
    """Build a settings dataclass from a config section."""
    if doc is None:
        return cls()
    args = dict(doc)
    for key in coerce_tuples:
        if key in args and isinstance(args[key], list):
            args[key] = tuple(args[key])
    try:
        return cls(**args)
    except (TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad {cls.__name__} section: {exc}") from exc


def _constraints(cfg) -> geo.RoomConstraints:
    return _from_section(
        geo.RoomConstraints, cfg.get("constraints"),
        coerce_tuples=("back", "right", "front", "left", "floor", "ceiling",
                       "absorption"))


def _ula(cfg) -> sim.ULAConfig:
    return _from_section(sim.ULAConfig, cfg.get("ula"))


def _sim_params(cfg) -> sim.SimParams:
    return _from_section(sim.SimParams, cfg.get("sim"))


def _grid(cfg, params: sim.SimParams) -> radon.RadonGrid:
    if "grid" in cfg:
        return _from_section(radon.RadonGrid, cfg.get("grid"))
    return radon.RadonGrid(fs=params.fs, c=params.c)


def _estimator_config(cfg) -> est.EstimatorConfig:
    return _from_section(
        est.EstimatorConfig, cfg.get("estimator"),
        coerce_tuples=("min_separation", "order_tols", "order_weights"))


# ---------------------------------------------------------------------------
# atomic writes

def _write_text(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _write_with(path: Path, writer) -> None:
    """Run a path-taking writer against a temp file, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=path.name + ".")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# room fixture files

def _rooms_doc(base_seed, count, constraints) -> dict:
    rooms = []
    for i in range(count):
        seed = base_seed + i
        room, mic, alphas = geo.sample_room(constraints, seed=seed)
        labels = geo.labels_from_room(room, mic)
        rooms.append({
            "id": f"room-{i:06d}",
            "seed": seed,
            "room": ds.room_to_dict(room),
            "mic": [float(mic.r_o[0]), float(mic.r_o[1])],
            "absorptions": [float(a) for a in alphas],
            "labels": est.labels_to_dict(labels),
        })
    return {
        "format": "rooms/1",
        "base_seed": base_seed,
        "constraints": {k: list(v) if isinstance(v, tuple) else v
                        for k, v in vars(constraints).items()},
        "rooms": rooms,
    }


def _read_rooms(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidFileFormat(f"rooms file is not JSON: {exc}") from exc
    if doc.get("format") != "rooms/1":
        raise InvalidFileFormat("not a rooms fixture file")
    return doc


def _pick_room(doc, wanted):
    entries = doc.get("rooms", [])
    if not entries:
        raise InvalidFileFormat("rooms fixture holds no rooms")
    if wanted is None:
        return entries[0]
    for entry in entries:
        if entry.get("id") == wanted:
            return entry
    raise InvalidFileFormat(f"no room {wanted!r} in the fixture")


# ---------------------------------------------------------------------------
# subcommands

def cmd_sample_rooms(args) -> int:
    cfg = _load_config(args.config)
    doc = _rooms_doc(args.seed, args.count, _constraints(cfg))
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    entry = _pick_room(_read_rooms(args.rooms), args.id)
    room = ds.room_from_dict(entry["room"])
    mic = geo.MicPose(np.array([*entry["mic"], 0.0]))
    rirs = sim.simulate_rirs(room, mic, _ula(cfg), entry["absorptions"],
                             _sim_params(cfg))
    _write_with(args.out, lambda p: sim.write_rir_set(p, rirs))
    print(args.out)
    return 0


def cmd_radon(args) -> int:
    cfg = _load_config(args.config)
    rirs = sim.read_rir_set(args.rirs)
    params = _sim_params(cfg)
    grid = _grid(cfg, params)
    rmap = radon.radon_map(rirs, _ula(cfg), grid)
    _write_with(args.out, lambda p: radon.write_map(p, rmap))
    if args.pgm:
        _write_with(args.pgm, lambda p: radon.write_map_pgm(p, rmap))
    if args.csv:
        _write_with(args.csv, lambda p: radon.write_map_csv(p, rmap))
    print(args.out)
    return 0


def cmd_dataset(args) -> int:
    cfg = _load_config(args.config)
    counts = dict(PAPER_COUNTS if args.profile == "paper" else DESK_COUNTS)
    for split in counts:
        override = getattr(args, split)
        if override is not None:
            counts[split] = override
    params = _sim_params(cfg)
    log = (lambda sid: print(sid, file=sys.stderr)) if args.verbose else None
    manifest = ds.generate(
        counts, args.out, base_seed=args.seed,
        constraints=_constraints(cfg), ula=_ula(cfg), params=params,
        grid=_grid(cfg, params), jobs=args.jobs, log=log)
    print(manifest.root / ds.MANIFEST_NAME)
    return 0


_EST_MANIFESTS: dict = {}


def _estimate_one(task):
    """Worker body for split estimation; manifest cached per process."""
    manifest_path, sid, constraints, config, fallback = task
    manifest = _EST_MANIFESTS.get(manifest_path)
    if manifest is None:
        manifest = ds.read_manifest(manifest_path)
        _EST_MANIFESTS[manifest_path] = manifest
    rmap, _ = ds.read_sample(manifest, sid)
    labels = est.estimate_labels(rmap, constraints, config, fallback)
    return sid, est.labels_to_dict(labels)


def cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    config = _estimator_config(cfg)
    if (args.map is None) == (args.dataset is None):
        raise InvalidFileFormat("give exactly one of --map or --dataset")

    if args.map is not None:
        rmap = radon.read_map(args.map)
        constraints = _constraints(cfg)
        labels = est.estimate_labels(rmap, constraints, config, args.fallback)
        items = [(Path(args.map).stem, labels)]
        grid_hash = rmap.grid.fingerprint()
    else:
        manifest = ds.read_manifest(args.dataset)
        ids = manifest.split_ids(args.split)
        if not ids:
            raise InvalidFileFormat(
                f"split {args.split!r} is empty or unknown")
        # the manifest's own sampling windows are the natural prior; a
        # config section still wins if one is given
        constraints = (_constraints(cfg) if "constraints" in cfg
                       else manifest.constraints)
        tasks = [(str(args.dataset), sid, constraints, config, args.fallback)
                 for sid in ids]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_estimate_one, tasks, chunksize=1))
        else:
            results = [_estimate_one(t) for t in tasks]
        items = [(sid, est.labels_from_dict(doc)) for sid, doc in results]
        grid_hash = manifest.grid.fingerprint()

    est.write_predictions(args.out, items, estimator="classical",
                          grid_hash=grid_hash)
    print(args.out)
    return 0


def cmd_evaluate(args) -> int:
    manifest = ds.read_manifest(args.dataset)
    meta, preds = est.read_predictions(args.predictions)
    if meta["grid_hash"] != manifest.grid.fingerprint():
        raise InvalidFileFormat(
            "predictions were made on a different grid than the dataset")
    ids = manifest.split_ids(args.split)
    if not ids:
        raise InvalidFileFormat(f"split {args.split!r} is empty or unknown")
    missing = [sid for sid in ids if sid not in preds]
    if missing:
        raise InvalidFileFormat(
            f"predictions missing {len(missing)} of {len(ids)} samples "
            f"(first: {missing[0]})")

    comparisons = []
    losses = []
    for sid in ids:
        truth = manifest.records[sid]
        estimate = preds[sid]
        comparisons.append(
            metrics.room_error(truth.room, geo.room_from_labels(estimate)))
        losses.append(ds.compute_loss(estimate, truth.labels))
    report = metrics.aggregate(comparisons)
    doc = metrics.report_to_dict(report)
    doc["estimator"] = meta["estimator"]
    doc["split"] = args.split
    doc["loss_mean"] = float(np.mean(losses))
    doc["loss_std"] = float(np.std(losses))
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if args.table:
        print(metrics.render_report(report))
    else:
        print(args.out)
    return 0


# ---------------------------------------------------------------------------
# floor plan export

def _plan_geometry(args) -> tuple[geo.RoomGeometry, np.ndarray,
                                  geo.RoomGeometry | None]:
    if (args.rooms is None) == (args.dataset is None):
        raise InvalidFileFormat("give exactly one of --rooms or --dataset")
    if args.rooms is not None:
        entry = _pick_room(_read_rooms(args.rooms), args.id)
        truth = ds.room_from_dict(entry["room"])
        mic_xy = np.array(entry["mic"], dtype=float)
    else:
        manifest = ds.read_manifest(args.dataset)
        sid = args.id or (manifest.split_ids("test") or list(manifest.records))[0]
        rec = manifest.records.get(sid)
        if rec is None:
            raise InvalidFileFormat(f"no sample {sid!r} in the manifest")
        truth = rec.room
        mic_xy = np.array(rec.labels.mic_xy)
        args.id = sid
    estimate = None
    if args.predictions:
        meta, preds = est.read_predictions(args.predictions)
        if args.id in preds:
            estimate = geo.room_from_labels(preds[args.id])
        else:
            raise InvalidFileFormat(
                f"no prediction for {args.id!r} in {args.predictions}")
    return truth, mic_xy, estimate


def _floorplan_svg(truth: geo.RoomGeometry, mic_xy: np.ndarray,
                   estimate: geo.RoomGeometry | None,
                   half_length: float) -> str:
    """Top-down overlay: truth dashed, estimate solid, array and mic marked."""
    layers = [("truth", truth.corners(), "#555555", "6,4")]
    if estimate is not None:
        layers.append(("estimate", estimate.corners(), "#c0392b", ""))
    pts = np.vstack([c for _, c, _, _ in layers]
                    + [mic_xy[None, :], np.array([[-half_length, 0.0],
                                                  [half_length, 0.0]])])
    xmin, ymin = pts.min(axis=0) - 0.5
    xmax, ymax = pts.max(axis=0) + 0.5
    scale = 100.0

    def sx(x):
        return (x - xmin) * scale

    def sy(y):
        return (ymax - y) * scale

    w = sx(xmax)
    h = sy(ymin)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" '
           f'viewBox="0 0 {w:.1f} {h:.1f}" width="{w:.1f}" height="{h:.1f}">',
           f'<rect width="{w:.1f}" height="{h:.1f}" fill="white"/>']
    for name, corners, color, dash in layers:
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in corners)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polygon points="{points}" fill="none" '
                   f'stroke="{color}" stroke-width="3"{dash_attr}/>')
    ax0, ax1 = sx(-half_length), sx(half_length)
    ay = sy(0.0)
    out.append(f'<line x1="{ax0:.2f}" y1="{ay:.2f}" x2="{ax1:.2f}" '
               f'y2="{ay:.2f}" stroke="#2061a9" stroke-width="5"/>')
    out.append(f'<circle cx="{sx(mic_xy[0]):.2f}" cy="{sy(mic_xy[1]):.2f}" '
               f'r="6" fill="#1e8449"/>')
    rows = [f"truth: floor {-truth.d_floor:.3f} m, "
            f"ceiling {truth.d_ceiling:.3f} m"]
    if estimate is not None:
        rows.append(f"estimate: floor {-estimate.d_floor:.3f} m, "
                    f"ceiling {estimate.d_ceiling:.3f} m")
    for i, row in enumerate(rows):
        out.append(f'<text x="10" y="{22 + 20 * i}" '
                   f'font-family="monospace" font-size="16">{row}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _floorplan_csv(truth: geo.RoomGeometry, mic_xy: np.ndarray,
                   estimate: geo.RoomGeometry | None) -> str:
    lines = ["who,item,a,b"]

    def emit(name, room):
        for i, (x, y) in enumerate(room.corners()):
            lines.append(f"{name},corner-{i},{x:.9g},{y:.9g}")
        lines.append(f"{name},floor_z,{-room.d_floor:.9g},")
        lines.append(f"{name},ceiling_z,{room.d_ceiling:.9g},")

    emit("truth", truth)
    if estimate is not None:
        emit("estimate", estimate)
    lines.append(f"mic,position,{mic_xy[0]:.9g},{mic_xy[1]:.9g}")
    return "\n".join(lines) + "\n"


def cmd_export_floorplan(args) -> int:
    cfg = _load_config(args.config)
    truth, mic_xy, estimate = _plan_geometry(args)
    svg = _floorplan_svg(truth, mic_xy, estimate, _ula(cfg).half_length)
    _write_text(args.out, svg)
    if args.csv:
        _write_text(args.csv, _floorplan_csv(truth, mic_xy, estimate))
    print(args.out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roomgeo",
        description="Room geometry inference pipelines: sampling, "
                    "simulation, mapping, estimation and reporting.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", default=None,
                       help="JSON settings file; flags still win")
        return p

    p = add("sample-rooms", cmd_sample_rooms,
            "draw random rooms into a JSON fixture")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("simulate", cmd_simulate,
            "render the multi-channel RIRs of one fixture room")
    p.add_argument("--rooms", required=True)
    p.add_argument("--id", default=None, help="room id; default first")
    p.add_argument("--out", required=True)

    p = add("radon", cmd_radon, "turn an RIR container into a map")
    p.add_argument("--rirs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", default=None, help="also write a PGM image")
    p.add_argument("--csv", default=None, help="also write CSV values")

    p = add("dataset", cmd_dataset, "generate a supervised corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    for split in ("train", "val", "test"):
        p.add_argument(f"--{split}", type=int, default=None,
                       help=f"{split} count; overrides the profile")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--verbose", action="store_true",
                   help="print sample ids to stderr as they finish")

    p = add("estimate", cmd_estimate,
            "run the geometric estimator on a map or a dataset split")
    p.add_argument("--map", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--fallback", action="store_true",
                   help="fill walls with no usable peak from the prior")
    p.add_argument("--jobs", type=int, default=1)

    p = add("evaluate", cmd_evaluate,
            "score a predictions file against dataset ground truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--table", action="store_true",
                   help="print the fixed-width table instead of the path")

    p = add("export-floorplan", cmd_export_floorplan,
            "draw a top-down SVG of a room, optionally with an estimate")
    p.add_argument("--rooms", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--id", default=None)
    p.add_argument("--predictions", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RoomGeoError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
