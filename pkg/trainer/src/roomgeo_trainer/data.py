"""Reader for the dataset manifest and map shards.

Implements the on-disk contract directly (JSON manifest, concatenated
binary map records with CRC32 checksums) so the trainer has no import
dependency on the package that generated the data.

Label vectors are flattened to 12 floats in a fixed order: microphone
xy, then the back/right/front/left wall-image xy pairs, then the signed
floor and ceiling heights.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptRecord, InvalidFileFormat, SampleNotFound

MAP_HEADER = struct.Struct("<iiiifffi")
MAP_MAGIC = int.from_bytes(b"RTM1", "little")
MAP_VERSION = 1

XY_KEYS = ("mic_xy", "back_xy", "right_xy", "front_xy", "left_xy")
LABEL_DIM = 12


def flatten_labels(doc: dict) -> np.ndarray:
    try:
        parts = [float(x) for key in XY_KEYS for x in doc[key]]
        parts += [float(doc["floor_z"]), float(doc["ceiling_z"])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad label object: {exc}") from exc
    if len(parts) != LABEL_DIM:
        raise InvalidFileFormat(f"label vector has {len(parts)} entries")
    return np.array(parts, dtype=np.float32)


def labels_to_doc(vec) -> dict:
    """Inverse of :func:`flatten_labels`, for prediction files."""
    vec = np.asarray(vec, dtype=float).reshape(LABEL_DIM)
    doc = {key: [float(vec[2 * i]), float(vec[2 * i + 1])]
           for i, key in enumerate(XY_KEYS)}
    doc["floor_z"] = float(vec[10])
    doc["ceiling_z"] = float(vec[11])
    return doc


@dataclass(frozen=True)
class Record:
    id: str
    split: str
    offset: int
    length: int
    crc32: int
    labels: np.ndarray     # (12,) float32


@dataclass(eq=False)
class Manifest:
    root: Path
    grid_hash: str
    num_radii: int
    theta_count: int
    shards: dict[str, str]
    records: dict[str, Record]

    def split_ids(self, split: str) -> list[str]:
        if split not in self.shards:
            raise SampleNotFound(f"no split {split!r} in the manifest")
        ids = [sid for sid, r in self.records.items() if r.split == split]
        ids.sort(key=lambda s: self.records[s].offset)
        return ids


def load_manifest(path) -> Manifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidFileFormat(f"manifest is not JSON: {exc}") from exc
    if doc.get("format") != "dataset/1":
        raise InvalidFileFormat("not a dataset manifest")
    try:
        grid = doc["grid"]
        num_radii = int(round(grid["fs"] * grid["rho_max"] / grid["c"]))
        theta_count = int(round(180.0 / grid["theta_step"])) + 1
        shards = {name: info["shard"]
                  for name, info in doc["splits"].items()}
        records = {}
        for entry in doc["samples"]:
            records[entry["id"]] = Record(
                id=entry["id"], split=entry["split"],
                offset=int(entry["offset"]), length=int(entry["length"]),
                crc32=int(entry["crc32"]),
                labels=flatten_labels(entry["labels"]))
        return Manifest(root=path.parent, grid_hash=doc["grid_hash"],
                        num_radii=num_radii, theta_count=theta_count,
                        shards=shards, records=records)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad manifest structure: {exc}") from exc


def decode_map(raw: bytes, manifest: Manifest, sid: str) -> np.ndarray:
    if len(raw) < MAP_HEADER.size:
        raise CorruptRecord(f"{sid}: record shorter than its header")
    magic, version, n, t, _, _, _, _ = MAP_HEADER.unpack_from(raw, 0)
    if magic != MAP_MAGIC or version != MAP_VERSION:
        raise CorruptRecord(f"{sid}: bad record header")
    if (n, t) != (manifest.num_radii, manifest.theta_count):
        raise CorruptRecord(
            f"{sid}: stored map is {n} x {t}, manifest grid is "
            f"{manifest.num_radii} x {manifest.theta_count}")
    if len(raw) != MAP_HEADER.size + 4 * n * t:
        raise CorruptRecord(f"{sid}: record payload truncated")
    vals = np.frombuffer(raw, dtype="<f4", offset=MAP_HEADER.size)
    return vals.reshape(n, t)


def read_record(manifest: Manifest, sid: str) -> tuple[np.ndarray, np.ndarray]:
    """One (map, labels) pair by id, checksum enforced."""
    rec = manifest.records.get(sid)
    if rec is None:
        raise SampleNotFound(f"no sample {sid!r} in the manifest")
    with open(manifest.root / manifest.shards[rec.split], "rb") as f:
        f.seek(rec.offset)
        raw = f.read(rec.length)
    if len(raw) != rec.length:
        raise CorruptRecord(f"{sid}: shard ends early")
    if zlib.crc32(raw) != rec.crc32:
        raise CorruptRecord(f"{sid}: checksum mismatch")
    return decode_map(raw, manifest, sid), rec.labels


def iter_split(manifest: Manifest, split: str):
    """Sequential (id, map, labels) stream over one split."""
    ids = manifest.split_ids(split)
    with open(manifest.root / manifest.shards[split], "rb") as f:
        for sid in ids:
            rec = manifest.records[sid]
            f.seek(rec.offset)
            raw = f.read(rec.length)
            if len(raw) != rec.length:
                raise CorruptRecord(f"{sid}: shard ends early")
            if zlib.crc32(raw) != rec.crc32:
                raise CorruptRecord(f"{sid}: checksum mismatch")
            yield sid, decode_map(raw, manifest, sid), rec.labels


def load_split(manifest: Manifest, split: str, limit: int | None = None):
    """Whole split as dense arrays: (ids, maps (B, N, T), labels (B, 12)).

    Fine for desk-scale corpora; for anything larger iterate instead.
    """
    ids = manifest.split_ids(split)[:limit]
    maps = np.empty((len(ids), manifest.num_radii, manifest.theta_count),
                    dtype=np.float32)
    labels = np.empty((len(ids), LABEL_DIM), dtype=np.float32)
    for i, sid in enumerate(ids):
        maps[i], labels[i] = read_record(manifest, sid)
    return ids, maps, labels
