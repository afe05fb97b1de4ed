"""Image-method simulation of multi-channel room impulse responses.

Sources are the array loudspeakers; the receiver is the measurement
microphone.  Mirror images are enumerated wall-sequence by wall-sequence up
to a reflection order cap, pruned by unfolding each candidate path and
checking that every reflection point lands on its wall's face.  Each
surviving image contributes a distance-attenuated, band-limited impulse at
its fractional time of arrival.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidFileFormat, SourceOutsideRoom
from .geometry import WALL_ORDER, MicPose, RoomGeometry

#: taps on each side of a synthesis kernel centre
KERNEL_HALFWIDTH = 40

#: covers a 15 m steering grid at 48 kHz including array reach and kernel tails
DEFAULT_DURATION = 2208

_RIR_MAGIC = int.from_bytes(b"RIR1", "little")

_FACE_TOL = 1e-9


@dataclass(frozen=True)
class ULAConfig:
    """Uniform linear loudspeaker array on the x axis, centred at the origin."""

    num_speakers: int = 13
    spacing: float = 0.06

    def __post_init__(self):
        if self.num_speakers < 1:
            raise ValueError("need at least one speaker")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def half_length(self) -> float:
        return (self.num_speakers - 1) * self.spacing / 2.0

    def positions(self) -> np.ndarray:
        """Speaker positions, shape (M, 3), symmetric about the origin."""
        m = np.arange(self.num_speakers)
        x = (m - (self.num_speakers - 1) / 2.0) * self.spacing
        out = np.zeros((self.num_speakers, 3))
        out[:, 0] = x
        return out


@dataclass(frozen=True)
class SimParams:
    """Sampling, propagation and synthesis settings."""

    fs: int = 48_000
    c: float = 343.0
    max_order: int = 5
    lpf_cutoff: float = 20_000.0
    duration_samples: int = DEFAULT_DURATION

    def __post_init__(self):
        if self.fs <= 0 or self.c <= 0:
            raise ValueError("fs and c must be positive")
        if not (0 < self.lpf_cutoff <= self.fs / 2):
            raise ValueError("cutoff must lie in (0, fs/2]")
        if self.max_order < 0:
            raise ValueError("max_order must be non-negative")
        if self.duration_samples < 1:
            raise ValueError("duration_samples must be positive")


@dataclass(frozen=True, eq=False)
class ImageSource:
    """One mirror image: position, accumulated gain, and its wall sequence."""

    position: np.ndarray
    gain: float
    order: int
    walls: tuple[str, ...]

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass(eq=False)
class RIRSet:
    """Multi-channel impulse responses, one row per speaker."""

    channels: np.ndarray
    fs: int

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=float)
        if self.channels.ndim != 2:
            raise ValueError("channels must be a 2-D (M, N) array")

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]


def _absorption_map(absorptions) -> dict[str, float]:
    ab = np.asarray(absorptions, dtype=float)
    if ab.shape != (6,):
        raise ValueError("expected six absorptions ordered "
                         f"{WALL_ORDER}, got shape {ab.shape}")
    if np.any(ab < 0) or np.any(ab >= 1):
        raise ValueError("absorptions must lie in [0, 1)")
    return dict(zip(WALL_ORDER, ab))


def _enumerate_images_multi(
    room: RoomGeometry,
    sources: np.ndarray,
    receiver: np.ndarray,
    max_order: int,
    absorptions,
) -> list[list[ImageSource]]:
    """Shared image tree for several sources against one receiver.

    Wall sequences are identical across sources, so the mirror cascade and
    the unfold validation are vectorised over the source axis.  Returns one
    image list per source, order-0 first.
    """
    walls = room.walls()
    alpha = _absorption_map(absorptions)
    names = list(walls)
    normals = np.array([walls[n].v for n in names])        # (6, 3)
    dists = np.array([walls[n].d for n in names])          # (6,)
    refl = np.array([math.sqrt(1.0 - alpha[n]) for n in names])

    S = sources.shape[0]
    for s in range(S):
        if not room.contains(sources[s]):
            raise SourceOutsideRoom(f"source {s} is not inside the room")
    if not room.contains(receiver):
        raise SourceOutsideRoom("receiver is not inside the room")

    out: list[list[ImageSource]] = [
        [ImageSource(sources[s].copy(), 1.0, 0, ())] for s in range(S)
    ]

    # level entries: (wall index sequence, gain, chain of (S,3) positions)
    level = [((), 1.0, [sources.astype(float)])]
    for order in range(1, max_order + 1):
        nxt = []
        for seq, gain, chain in level:
            last = seq[-1] if seq else -1
            pos = chain[-1]
            for wi in range(6):
                if wi == last:
                    continue
                signed = pos @ normals[wi] + dists[wi]
                mirrored = pos - 2.0 * signed[:, None] * normals[wi]
                new_chain = chain + [mirrored]
                new_gain = gain * refl[wi]
                new_seq = seq + (wi,)
                valid = _unfold_valid(new_seq, new_chain, receiver,
                                      normals, dists)
                wall_names = tuple(names[i] for i in new_seq)
                for s in np.nonzero(valid)[0]:
                    out[s].append(ImageSource(
                        mirrored[s].copy(), new_gain, order, wall_names))
                nxt.append((new_seq, new_gain, new_chain))
        level = nxt
    return out


def _unfold_valid(
    seq: tuple[int, ...],
    chain: list[np.ndarray],
    receiver: np.ndarray,
    normals: np.ndarray,
    dists: np.ndarray,
) -> np.ndarray:
    """Walk the reflection path backwards from the receiver.

    For each mirror stage the segment toward the current image must cross
    that wall's plane, and the crossing point must lie on the wall's face,
    i.e. inside every other half-space.  Convex rooms need no further
    occlusion checks.
    """
    S = chain[0].shape[0]
    p = np.broadcast_to(receiver, (S, 3)).copy()
    valid = np.ones(S, dtype=bool)
    for j in range(len(seq), 0, -1):
        wi = seq[j - 1]
        image = chain[j]
        s_p = p @ normals[wi] + dists[wi]
        s_i = image @ normals[wi] + dists[wi]
        den = s_p - s_i
        crossing = den > _FACE_TOL
        t = np.where(crossing, s_p / np.where(crossing, den, 1.0), -1.0)
        crossing &= (t > 0.0) & (t < 1.0)
        valid &= crossing
        if not valid.any():
            return valid
        q = p + t[:, None] * (image - p)
        on_face = np.ones(S, dtype=bool)
        for wo in range(len(dists)):
            if wo == wi:
                continue
            on_face &= (q @ normals[wo] + dists[wo]) >= -_FACE_TOL
        valid &= on_face
        p = np.where(valid[:, None], q, p)
    return valid


def enumerate_images(
    room: RoomGeometry,
    source,
    receiver,
    max_order: int,
    absorptions,
) -> list[ImageSource]:
    """Mirror images of one source visible from the receiver.

    The order-0 entry is the source itself with unit gain; each reflection
    multiplies the gain by sqrt(1 - alpha) of the wall it bounces off.
    """
    sources = np.asarray(source, dtype=float).reshape(1, 3)
    receiver = np.asarray(receiver, dtype=float).reshape(3)
    return _enumerate_images_multi(
        room, sources, receiver, max_order, absorptions)[0]


def max_image_count(max_order: int) -> int:
    """Candidate-sequence bound: 1 + sum over k of 6 * 5^(k-1)."""
    return 1 + sum(6 * 5 ** (k - 1) for k in range(1, max_order + 1))


def _kernel(offsets: np.ndarray, fs: int, cutoff: float) -> np.ndarray:
    """Hann-windowed sinc evaluated at fractional sample offsets.

    Unit value at zero offset; the window reaches zero smoothly at
    ``KERNEL_HALFWIDTH + 1`` so the extra edge tap vanishes.
    """
    hw1 = KERNEL_HALFWIDTH + 1
    win = 0.5 + 0.5 * np.cos(np.pi * np.clip(offsets / hw1, -1.0, 1.0))
    return np.sinc(2.0 * cutoff * offsets / fs) * win


def synthesize_rir(
    images: list[ImageSource], mic, params: SimParams,
) -> np.ndarray:
    """Sum band-limited impulses for every image into one channel.

    Each image lands at fractional delay fs * dist / c with amplitude
    gain / (4 pi dist); contributions beyond the configured duration are
    silently truncated.
    """
    mic = np.asarray(mic, dtype=float).reshape(3)
    h = np.zeros(params.duration_samples)
    if not images:
        return h
    pos = np.array([img.position for img in images])
    gains = np.array([img.gain for img in images])
    dist = np.linalg.norm(pos - mic, axis=1)
    keep = dist > 1e-9
    gains, dist = gains[keep], dist[keep]
    tau = params.fs * dist / params.c
    amp = gains / (4.0 * np.pi * dist)

    hw = KERNEL_HALFWIDTH
    near = tau - hw <= params.duration_samples
    tau, amp = tau[near], amp[near]
    if tau.size == 0:
        return h
    base = np.floor(tau).astype(int)
    taps = np.arange(-hw, hw + 2)
    idx = base[:, None] + taps[None, :]
    offsets = idx - tau[:, None]
    vals = amp[:, None] * _kernel(offsets, params.fs, params.lpf_cutoff)
    ok = (idx >= 0) & (idx < params.duration_samples)
    np.add.at(h, idx[ok], vals[ok])
    return h


def simulate_rirs(
    room: RoomGeometry,
    mic: MicPose,
    ula: ULAConfig,
    absorptions,
    params: SimParams,
) -> RIRSet:
    """Simulate every speaker-to-microphone channel of the array."""
    sources = ula.positions()
    per_source = _enumerate_images_multi(
        room, sources, mic.r_o, params.max_order, absorptions)
    channels = np.stack([
        synthesize_rir(images, mic.r_o, params) for images in per_source
    ])
    return RIRSet(channels, params.fs)


def positive_part(rir: np.ndarray) -> np.ndarray:
    """Half-wave rectification used ahead of map accumulation."""
    return np.maximum(np.asarray(rir, dtype=float), 0.0)


# ---------------------------------------------------------------------------
# binary container

def write_rir_set(path, rirs: RIRSet) -> None:
    """Binary container: magic, fs, M, N as little-endian int32, then
    channel-major little-endian float32 samples."""
    header = struct.pack(
        "<iiii", _RIR_MAGIC, int(rirs.fs),
        rirs.num_channels, rirs.num_samples)
    payload = rirs.channels.astype("<f4").tobytes(order="C")
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_rir_set(path) -> RIRSet:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16:
        raise InvalidFileFormat("RIR container shorter than its header")
    magic, fs, m, n = struct.unpack_from("<iiii", raw, 0)
    if magic != _RIR_MAGIC:
        raise InvalidFileFormat(f"bad RIR magic 0x{magic:08x}")
    if m < 1 or n < 1:
        raise InvalidFileFormat(f"bad RIR shape ({m}, {n})")
    expect = 16 + 4 * m * n
    if len(raw) != expect:
        raise InvalidFileFormat(
            f"RIR payload is {len(raw) - 16} bytes, expected {expect - 16}")
    data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(m, n)
    return RIRSet(data.astype(float), fs)
