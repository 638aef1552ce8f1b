import numpy as np
import pytest

from conftest import random_solenoidal
from toporelax.errors import CorruptSnapshotError
from toporelax.modeled import ComponentFields
from toporelax.relaxation import RelaxationState
from toporelax.snapshot import (
    FLAGS,
    Snapshot,
    decode_snapshot,
    encode_snapshot,
    read_snapshot,
    snapshot_roundtrip,
    state_snapshot,
    write_snapshot,
    write_state_snapshot,
)


@pytest.fixture
def snap(grid32, rng):
    a, b = (random_solenoidal(grid32, rng) for _ in range(2))
    return Snapshot(32, grid32.L, ("a", "b"), 0.25, {"a": a.data, "b": b.data}, groups=[("a", "b")])


def test_round_trip_bitwise(tmp_path, snap):
    p = write_snapshot(tmp_path / "x.snap", snap)
    back = snapshot_roundtrip(p)
    assert back.labels == snap.labels and back.t == snap.t and back.n == 32
    assert back.flags == FLAGS
    assert back.groups == [("a", "b")]
    for lab in snap.labels:
        assert np.array_equal(back.fields[lab], snap.fields[lab])


def test_hopf_field_round_trip(tmp_path, hopf_fields64):
    F = hopf_fields64
    s = Snapshot(64, F.grid.L, F.labels, 0.0, {lab: c.data for lab, c in zip(F.labels, F.components)})
    p = write_snapshot(tmp_path / "hopf.snap", s)
    back = read_snapshot(p)
    for lab, c in zip(F.labels, F.components):
        assert np.array_equal(back.fields[lab], c.data)


def test_file_layout(snap):
    raw = encode_snapshot(snap)
    first, rest = raw.split(b"\n", 1)
    assert first.startswith(b"TOPORELAX-SNAPSHOT v1 LE header_bytes=")
    hlen = int(first.rsplit(b"=", 1)[1])
    header = rest[:hlen]
    assert b'"energy-no-half"' in header and b'"bilinear-helicity"' in header
    payload = rest[hlen:]
    n = 32
    assert len(payload) == 2 * 3 * n**3 * 8
    # first payload value is B_x of label a at the origin; the next is one step in x
    vals = np.frombuffer(payload[:16], dtype="<f8")
    assert vals[0] == snap.fields["a"][0, 0, 0, 0]
    assert vals[1] == snap.fields["a"][0, 1, 0, 0]


def test_encoding_is_deterministic(snap):
    assert encode_snapshot(snap) == encode_snapshot(snap)


def test_truncated_payload(tmp_path, snap):
    raw = encode_snapshot(snap)
    p = tmp_path / "cut.snap"
    p.write_bytes(raw[:-8])
    with pytest.raises(CorruptSnapshotError, match="payload"):
        read_snapshot(p)


def test_truncated_header(snap):
    raw = encode_snapshot(snap)
    first_len = raw.index(b"\n") + 1
    with pytest.raises(CorruptSnapshotError, match="truncated header"):
        decode_snapshot(raw[: first_len + 10])


def test_foreign_byte_order_rejected(snap):
    raw = encode_snapshot(snap).replace(b" LE ", b" BE ", 1)
    with pytest.raises(CorruptSnapshotError, match="foreign byte order"):
        decode_snapshot(raw)


def test_bad_magic_rejected():
    with pytest.raises(CorruptSnapshotError, match="bad magic"):
        decode_snapshot(b"hello\nworld")


def test_extra_bytes_rejected(snap):
    with pytest.raises(CorruptSnapshotError):
        decode_snapshot(encode_snapshot(snap) + b"\0")


def test_wrong_shape_refused(snap):
    snap.fields["a"] = snap.fields["a"][:, :16]
    with pytest.raises(ValueError):
        encode_snapshot(snap)


def test_state_snapshot_carries_velocity(tmp_path, grid32, rng):
    comps = ComponentFields([random_solenoidal(grid32, rng)], ("B",))
    v = random_solenoidal(grid32, rng)
    s = RelaxationState.from_components(comps, v, scheme="moffatt")
    p = write_state_snapshot(tmp_path / "s.snap", s)
    snap = snapshot_roundtrip(p)
    assert snap.labels == ("B", "v")
    assert snap.extra["scheme"] == "moffatt"
    back, vel = snap.component_fields()
    assert back.labels == ("B",)
    assert np.allclose(vel.data, s.velocity.data, atol=0, rtol=0)


def test_velocity_label_reserved(grid32, rng):
    comps = ComponentFields([random_solenoidal(grid32, rng)], ("v",))
    s = RelaxationState.from_components(comps, scheme="vallis")
    with pytest.raises(ValueError, match="reserved"):
        state_snapshot(s)
