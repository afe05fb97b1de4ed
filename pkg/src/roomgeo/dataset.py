"""Supervised corpus: generation, storage and the label-space loss.

A dataset on disk is one JSON manifest plus one binary shard per split.
Shards concatenate per-map records in the container format of
:mod:`roomgeo.radon`; the manifest pins every sample's seed, byte window,
CRC32 and label vector, along with the exact grid, array, simulation and
sampling settings used.  Everything downstream of the base seed is
deterministic, so regenerating a dataset reproduces its files byte for
byte, and any single sample can be rebuilt from its stored seed alone.

Splits draw from disjoint seed ranges, which keeps them disjoint by
construction no matter how the counts change.
"""

from __future__ import annotations

import json
import os
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import radon
from .errors import (
    CorruptRecord,
    InvalidFileFormat,
    SampleNotFound,
    SamplingExhausted,
)
from .estimator import LABELS_SCHEMA, labels_from_dict, labels_to_dict
from .geometry import LabelVector, MicPose, RoomConstraints, RoomGeometry, Wall
from .radon import RadonGrid, RadonMap
from .simulator import SimParams, ULAConfig, simulate_rirs

MANIFEST_NAME = "manifest.json"

# Disjoint seed windows per split: ten million rooms of headroom each.
SEED_OFFSETS = {"train": 0, "val": 10_000_000, "test": 20_000_000}


def sample_id(split: str, index: int) -> str:
    return f"{split}-{index:06d}"


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One stored sample: provenance, byte window, and ground truth."""

    id: str
    split: str
    seed: int
    offset: int
    length: int
    crc32: int
    labels: LabelVector
    room: RoomGeometry
    absorptions: np.ndarray


@dataclass(eq=False)
class DatasetManifest:
    """Loaded manifest plus the directory its shards live in."""

    root: Path
    base_seed: int
    grid: RadonGrid
    ula: ULAConfig
    params: SimParams
    constraints: RoomConstraints
    shards: dict[str, str]
    records: dict[str, SampleRecord]

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in self.shards}
        for rec in self.records.values():
            out[rec.split] += 1
        return out

    def split_ids(self, split: str) -> list[str]:
        return [sid for sid, r in self.records.items() if r.split == split]


# ---------------------------------------------------------------------------
# loss

def compute_loss(pred: LabelVector, truth: LabelVector) -> float:
    """Mean of the seven per-target errors.

    The five planar targets (microphone and the four side-wall images)
    contribute their Euclidean xy distance; the two signed heights
    contribute their absolute difference.
    """
    total = 0.0
    for name in ("mic_xy", "back_xy", "right_xy", "front_xy", "left_xy"):
        a = getattr(pred, name)
        b = getattr(truth, name)
        total += float(np.hypot(a[0] - b[0], a[1] - b[1]))
    total += abs(float(pred.floor_z) - float(truth.floor_z))
    total += abs(float(pred.ceiling_z) - float(truth.ceiling_z))
    return total / 7.0


# ---------------------------------------------------------------------------
# serialization helpers

def room_to_dict(room: RoomGeometry) -> dict:
    out = {name: {"v": [float(x) for x in w.v], "d": float(w.d)}
           for name, w in room.side_walls().items()}
    out["d_floor"] = float(room.d_floor)
    out["d_ceiling"] = float(room.d_ceiling)
    return out


def room_from_dict(d: dict) -> RoomGeometry:
    try:
        walls = {name: Wall(np.array(d[name]["v"], dtype=float),
                            float(d[name]["d"]))
                 for name in geo.SIDE_WALLS}
        return RoomGeometry(d_floor=float(d["d_floor"]),
                            d_ceiling=float(d["d_ceiling"]), **walls)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad room object: {exc}") from exc


_WALL_SCHEMA = {
    "type": "object",
    "properties": {
        "v": {"type": "array", "items": {"type": "number"},
              "minItems": 3, "maxItems": 3},
        "d": {"type": "number"},
    },
    "required": ["v", "d"],
    "additionalProperties": False,
}

MANIFEST_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"const": "dataset/1"},
        "base_seed": {"type": "integer"},
        "grid": {
            "type": "object",
            "properties": {
                "rho_max": {"type": "number"},
                "fs": {"type": "integer"},
                "c": {"type": "number"},
                "theta_step": {"type": "number"},
            },
            "required": ["rho_max", "fs", "c", "theta_step"],
            "additionalProperties": False,
        },
        "grid_hash": {"type": "string"},
        "ula": {
            "type": "object",
            "properties": {
                "num_speakers": {"type": "integer"},
                "spacing": {"type": "number"},
            },
            "required": ["num_speakers", "spacing"],
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "properties": {
                "fs": {"type": "integer"},
                "c": {"type": "number"},
                "max_order": {"type": "integer"},
                "lpf_cutoff": {"type": "number"},
                "duration_samples": {"type": "integer"},
            },
            "required": ["fs", "c", "max_order", "lpf_cutoff",
                         "duration_samples"],
            "additionalProperties": False,
        },
        "constraints": {"type": "object"},
        "splits": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "count": {"type": "integer", "minimum": 0},
                    "seed_offset": {"type": "integer"},
                    "shard": {"type": "string"},
                },
                "required": ["count", "seed_offset", "shard"],
                "additionalProperties": False,
            },
        },
        "samples": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "split": {"type": "string"},
                    "seed": {"type": "integer"},
                    "offset": {"type": "integer", "minimum": 0},
                    "length": {"type": "integer", "minimum": 1},
                    "crc32": {"type": "integer", "minimum": 0},
                    "labels": LABELS_SCHEMA,
                    "room": {
                        "type": "object",
                        "properties": {
                            "back": _WALL_SCHEMA,
                            "right": _WALL_SCHEMA,
                            "front": _WALL_SCHEMA,
                            "left": _WALL_SCHEMA,
                            "d_floor": {"type": "number"},
                            "d_ceiling": {"type": "number"},
                        },
                        "required": ["back", "right", "front", "left",
                                     "d_floor", "d_ceiling"],
                        "additionalProperties": False,
                    },
                    "absorptions": {
                        "type": "array",
                        "items": {"type": "number",
                                  "minimum": 0, "exclusiveMaximum": 1},
                        "minItems": 6, "maxItems": 6,
                    },
                },
                "required": ["id", "split", "seed", "offset", "length",
                             "crc32", "labels", "room", "absorptions"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["format", "base_seed", "grid", "grid_hash", "ula", "sim",
                 "constraints", "splits", "samples"],
    "additionalProperties": False,
}


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# generation

_STEERING_CACHE: dict = {}


def _steering_for(ula: ULAConfig, grid: RadonGrid) -> radon.SteeringTable:
    """One table per (array, grid) pair per process; workers reuse it."""
    key = (ula, grid)
    tbl = _STEERING_CACHE.get(key)
    if tbl is None:
        tbl = radon.build_steering(ula, grid)
        _STEERING_CACHE[key] = tbl
    return tbl


def _render_record(task):
    """Worker body: sample, simulate, map, and pack one record."""
    sid, seed, constraints, ula, params, grid = task
    try:
        room, mic, alphas = geo.sample_room(constraints, seed=seed)
    except SamplingExhausted as exc:
        raise SamplingExhausted(f"{sid}: {exc}") from exc
    rirs = simulate_rirs(room, mic, ula, alphas, params)
    rmap = radon.radon_map(rirs, ula, grid, steering=_steering_for(ula, grid))
    labels = geo.labels_from_room(room, mic)
    return (sid, seed, radon.map_record_bytes(rmap),
            labels_to_dict(labels), room_to_dict(room),
            [float(a) for a in alphas])


def generate(
    counts: dict[str, int],
    out_dir,
    base_seed: int = 0,
    constraints: RoomConstraints | None = None,
    ula: ULAConfig | None = None,
    params: SimParams | None = None,
    grid: RadonGrid | None = None,
    jobs: int = 1,
    log=None,
) -> DatasetManifest:
    """Build the shards and manifest for the requested split sizes.

    ``counts`` maps split names (train/val/test) to sample counts.  Sample
    seeds are ``base_seed + split offset + index``, so any subset of the
    corpus can be regenerated independently.  Records stream to disk one
    at a time; with ``jobs > 1`` simulation fans out over processes while
    a single writer keeps the shard layout identical to a serial run.
    """
    constraints = constraints or RoomConstraints()
    ula = ula or ULAConfig()
    params = params or SimParams()
    grid = grid or RadonGrid(fs=params.fs, c=params.c)
    if params.fs != grid.fs:
        raise ValueError("simulation and grid sample rates disagree")
    for split in counts:
        if split not in SEED_OFFSETS:
            raise ValueError(f"unknown split name: {split!r}")
        if counts[split] < 0:
            raise ValueError("split counts must be non-negative")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shards = {}
    records: dict[str, SampleRecord] = {}
    sample_docs = []

    def consume(results, split, shard_path, tmp_path):
        offset = 0
        with open(tmp_path, "wb") as f:
            for sid, seed, payload, labels_doc, room_doc, alphas in results:
                f.write(payload)
                crc = zlib.crc32(payload)
                sample_docs.append({
                    "id": sid, "split": split, "seed": seed,
                    "offset": offset, "length": len(payload), "crc32": crc,
                    "labels": labels_doc, "room": room_doc,
                    "absorptions": alphas,
                })
                records[sid] = SampleRecord(
                    id=sid, split=split, seed=seed, offset=offset,
                    length=len(payload), crc32=crc,
                    labels=labels_from_dict(labels_doc),
                    room=room_from_dict(room_doc),
                    absorptions=np.array(alphas))
                offset += len(payload)
                if log is not None:
                    log(sid)
        os.replace(tmp_path, shard_path)

    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for split in sorted(counts, key=lambda s: SEED_OFFSETS[s]):
            shard_name = f"{split}.shard"
            shards[split] = shard_name
            shard_path = out_dir / shard_name
            tasks = [
                (sample_id(split, i), base_seed + SEED_OFFSETS[split] + i,
                 constraints, ula, params, grid)
                for i in range(counts[split])
            ]
            if executor is None:
                results = map(_render_record, tasks)
            else:
                results = executor.map(_render_record, tasks, chunksize=1)
            consume(results, split, shard_path,
                    out_dir / (shard_name + ".tmp"))
    finally:
        if executor is not None:
            executor.shutdown()

    doc = {
        "format": "dataset/1",
        "base_seed": base_seed,
        "grid": asdict(grid),
        "grid_hash": grid.fingerprint(),
        "ula": asdict(ula),
        "sim": asdict(params),
        "constraints": {k: list(v) if isinstance(v, tuple) else v
                        for k, v in asdict(constraints).items()},
        "splits": {s: {"count": counts[s], "seed_offset": SEED_OFFSETS[s],
                       "shard": shards[s]} for s in counts},
        "samples": sample_docs,
    }
    _atomic_write_text(out_dir / MANIFEST_NAME,
                       json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return DatasetManifest(
        root=out_dir, base_seed=base_seed, grid=grid, ula=ula, params=params,
        constraints=constraints, shards=shards, records=records)


# ---------------------------------------------------------------------------
# reading

def validate_manifest(doc: dict) -> None:
    """Schema-check a manifest document; raises on violations."""
    import jsonschema

    try:
        jsonschema.validate(doc, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidFileFormat(
            f"manifest rejected: {exc.message}") from exc


def read_manifest(path) -> DatasetManifest:
    """Load and cross-check a manifest; shards are opened lazily."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidFileFormat(f"not a JSON document: {exc}") from exc
    validate_manifest(doc)

    grid = RadonGrid(**doc["grid"])
    if grid.fingerprint() != doc["grid_hash"]:
        raise InvalidFileFormat("grid hash disagrees with grid parameters")
    cons_doc = {k: tuple(v) if isinstance(v, list) else v
                for k, v in doc["constraints"].items()}
    try:
        constraints = RoomConstraints(**cons_doc)
    except (TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad constraints: {exc}") from exc

    records: dict[str, SampleRecord] = {}
    seen_counts = {name: 0 for name in doc["splits"]}
    for entry in doc["samples"]:
        sid = entry["id"]
        if sid in records:
            raise InvalidFileFormat(f"duplicate sample id {sid!r}")
        if entry["split"] not in doc["splits"]:
            raise InvalidFileFormat(
                f"sample {sid!r} names unknown split {entry['split']!r}")
        records[sid] = SampleRecord(
            id=sid, split=entry["split"], seed=entry["seed"],
            offset=entry["offset"], length=entry["length"],
            crc32=entry["crc32"],
            labels=labels_from_dict(entry["labels"]),
            room=room_from_dict(entry["room"]),
            absorptions=np.array(entry["absorptions"]))
        seen_counts[entry["split"]] += 1
    for name, info in doc["splits"].items():
        if seen_counts[name] != info["count"]:
            raise InvalidFileFormat(
                f"split {name!r} lists {info['count']} samples "
                f"but {seen_counts[name]} records carry it")

    return DatasetManifest(
        root=path.parent, base_seed=doc["base_seed"], grid=grid,
        ula=ULAConfig(**doc["ula"]), params=SimParams(**doc["sim"]),
        constraints=constraints,
        shards={s: info["shard"] for s, info in doc["splits"].items()},
        records=records)


def read_sample(manifest: DatasetManifest, sid: str) -> tuple[RadonMap, LabelVector]:
    """Random access to one stored sample, checksum enforced."""
    rec = manifest.records.get(sid)
    if rec is None:
        raise SampleNotFound(f"no sample {sid!r} in the manifest")
    shard = manifest.root / manifest.shards[rec.split]
    with open(shard, "rb") as f:
        f.seek(rec.offset)
        raw = f.read(rec.length)
    if len(raw) != rec.length:
        raise CorruptRecord(
            f"{sid}: shard ends {rec.length - len(raw)} bytes early")
    if zlib.crc32(raw) != rec.crc32:
        raise CorruptRecord(f"{sid}: checksum mismatch")
    return radon.map_from_bytes(raw), rec.labels


def iter_split(manifest: DatasetManifest, split: str):
    """Sequential pass over one split, one (id, map, labels) at a time.

    Reads the shard front to back without seeking, so a full-corpus pass
    never holds more than one map in memory.
    """
    if split not in manifest.shards:
        raise SampleNotFound(f"no split {split!r} in the manifest")
    ids = manifest.split_ids(split)
    ids.sort(key=lambda s: manifest.records[s].offset)
    with open(manifest.root / manifest.shards[split], "rb") as f:
        pos = 0
        for sid in ids:
            rec = manifest.records[sid]
            if rec.offset != pos:
                f.seek(rec.offset)
                pos = rec.offset
            raw = f.read(rec.length)
            pos += len(raw)
            if len(raw) != rec.length:
                raise CorruptRecord(
                    f"{sid}: shard ends {rec.length - len(raw)} bytes early")
            if zlib.crc32(raw) != rec.crc32:
                raise CorruptRecord(f"{sid}: checksum mismatch")
            yield sid, radon.map_from_bytes(raw), rec.labels
