"""
Binary field snapshots
======================

Layout::

    TOPORELAX-SNAPSHOT v1 LE header_bytes=0000000123\\n
    {"n": 64, "L": 6.283..., "labels": [...], "t": 0.0, "flags": [...], ...}\\n
    payload

The first line is the magic; ``LE`` names the byte order of the payload
and ``header_bytes`` the length of the JSON line including its newline.
The payload stores, for every label in order, the x, y and z components
as ``n**3`` little-endian IEEE doubles each, x index fastest. Its length is
exactly ``len(labels) * 3 * n**3 * 8`` bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptSnapshotError
from .modeled import ComponentFields
from .spectral import Grid3, VectorField, ifft3

__all__ = [
    "Snapshot",
    "FLAGS",
    "encode_snapshot",
    "decode_snapshot",
    "write_snapshot",
    "read_snapshot",
    "write_state_snapshot",
    "snapshot_roundtrip",
]

MAGIC = b"TOPORELAX-SNAPSHOT v1 "
FLAGS = ("energy-no-half", "bilinear-helicity")
VELOCITY_LABEL = "v"
_FIRST = re.compile(rb"^TOPORELAX-SNAPSHOT v1 (LE|BE) header_bytes=(\d{10})\n$")


@dataclass
class Snapshot:
    n: int
    L: float
    labels: tuple[str, ...]
    t: float
    fields: dict[str, np.ndarray]
    flags: tuple[str, ...] = FLAGS
    groups: list[tuple[str, ...]] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid3:
        return Grid3(self.n, self.L)

    def vector(self, label: str) -> VectorField:
        return VectorField(self.grid, self.fields[label])

    def component_fields(self) -> tuple[ComponentFields, VectorField | None]:
        """Magnetic components and the velocity (if one was stored)."""
        labs = [lab for lab in self.labels if lab != VELOCITY_LABEL]
        comps = ComponentFields([self.vector(lab) for lab in labs], labs,
                                [tuple(gr) for gr in self.groups] or [])
        v = self.vector(VELOCITY_LABEL) if VELOCITY_LABEL in self.labels else None
        return comps, v


def encode_snapshot(snap: Snapshot) -> bytes:
    n = int(snap.n)
    header = {
        "n": n,
        "L": float(snap.L),
        "labels": list(snap.labels),
        "t": float(snap.t),
        "flags": list(snap.flags),
        "groups": [list(gr) for gr in snap.groups],
        "layout": "per label: x, y, z arrays of n^3 float64, x fastest",
    }
    header.update(snap.extra)
    hline = (json.dumps(header, sort_keys=True) + "\n").encode("ascii")
    first = MAGIC + b"LE header_bytes=%010d\n" % len(hline)
    parts = [first, hline]
    for lab in snap.labels:
        arr = np.asarray(snap.fields[lab], dtype=float)
        if arr.shape != (3, n, n, n):
            raise ValueError(f"field {lab!r} has shape {arr.shape}, expected {(3, n, n, n)}")
        for c in range(3):
            parts.append(arr[c].astype("<f8").tobytes(order="F"))
    return b"".join(parts)


def decode_snapshot(buf: bytes, source: str = "<bytes>") -> Snapshot:
    nl = buf.find(b"\n")
    if nl < 0 or not buf.startswith(MAGIC):
        raise CorruptSnapshotError(f"{source}: not a snapshot (bad magic)")
    m = _FIRST.match(buf[: nl + 1])
    if m is None:
        raise CorruptSnapshotError(f"{source}: malformed first line")
    if m.group(1) != b"LE":
        raise CorruptSnapshotError(f"{source}: foreign byte order {m.group(1).decode()} (expected LE)")
    hlen = int(m.group(2))
    start = nl + 1
    hline = buf[start : start + hlen]
    if len(hline) != hlen or not hline.endswith(b"\n"):
        raise CorruptSnapshotError(f"{source}: truncated header")
    try:
        header = json.loads(hline.decode("ascii"))
        n = int(header["n"])
        L = float(header["L"])
        labels = tuple(header["labels"])
        t = float(header["t"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptSnapshotError(f"{source}: unreadable header ({exc})") from exc
    payload = buf[start + hlen :]
    expect = len(labels) * 3 * n**3 * 8
    if len(payload) != expect:
        raise CorruptSnapshotError(
            f"{source}: payload has {len(payload)} bytes, header implies {expect}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    fields = {}
    per = n**3
    for i, lab in enumerate(labels):
        comps = [flat[(3 * i + c) * per : (3 * i + c + 1) * per].reshape((n, n, n), order="F") for c in range(3)]
        fields[lab] = np.array(comps, dtype=float)
    known = {"n", "L", "labels", "t", "flags", "groups", "layout"}
    return Snapshot(
        n, L, labels, t, fields,
        flags=tuple(header.get("flags", ())),
        groups=[tuple(gr) for gr in header.get("groups", [])],
        extra={k: v for k, v in header.items() if k not in known},
    )


def write_snapshot(path, snap: Snapshot) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(snap))
    return path


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    return decode_snapshot(path.read_bytes(), str(path))


def state_snapshot(state) -> Snapshot:
    """Snapshot of a :class:`~toporelax.relaxation.RelaxationState`."""
    if VELOCITY_LABEL in state.labels:
        raise ValueError(f"component label {VELOCITY_LABEL!r} is reserved for the velocity")
    n = state.grid.n
    data = ifft3(state.b_hat, n)
    fields = {lab: data[i] for i, lab in enumerate(state.labels)}
    labels = list(state.labels)
    if state.scheme == "moffatt":
        fields[VELOCITY_LABEL] = ifft3(state.v_hat, n)
        labels.append(VELOCITY_LABEL)
    return Snapshot(n, state.grid.L, tuple(labels), state.t, fields,
                    groups=list(state.groups), extra={"scheme": state.scheme})


def write_state_snapshot(path, state) -> Path:
    return write_snapshot(path, state_snapshot(state))


def snapshot_roundtrip(path) -> Snapshot:
    """
    Read a snapshot, re-encode it and check that the bytes are identical.

    Raises :class:`CorruptSnapshotError` for truncated, foreign-endian or
    otherwise inconsistent files.
    """
    raw = Path(path).read_bytes()
    snap = decode_snapshot(raw, str(path))
    if encode_snapshot(snap) != raw:
        raise CorruptSnapshotError(f"{path}: re-encoding does not reproduce the file")
    return snap
