import json
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from branchstereo.errors import AnnotationError, BranchStereoError, ParseError
from branchstereo.fusion import estimate_distance_polygon
from branchstereo.io import (
    AnnotationDoc,
    BranchEntry,
    read_annotations,
    read_float_map,
    read_image,
    write_annotations,
    write_float_map,
    write_image,
)


@pytest.mark.parametrize("bits", [8, 16])
def test_image_round_trip(tmp_path, rng, bits):
    maxval = (1 << bits) - 1
    img = rng.integers(0, maxval + 1, (7, 11)) / maxval
    write_image(tmp_path / "a.pgm", img, bits)
    back = read_image(tmp_path / "a.pgm")
    assert back.shape == (7, 11)
    assert np.array_equal(back, img)


def test_hand_built_gray(tmp_path):
    (tmp_path / "g.pgm").write_bytes(b"P5\n# two by two\n2 2\n255\n" + bytes([0, 51, 255, 102]))
    np.testing.assert_array_equal(read_image(tmp_path / "g.pgm"), [[0.0, 0.2], [1.0, 0.4]])
    (tmp_path / "g16.pgm").write_bytes(b"P5 2 1 65535\n" + b"\x00\x00\xff\xff")
    np.testing.assert_array_equal(read_image(tmp_path / "g16.pgm"), [[0.0, 1.0]])
    (tmp_path / "a.pgm").write_bytes(b"P2\n2 2\n4\n0 1\n2 4\n")
    np.testing.assert_array_equal(read_image(tmp_path / "a.pgm"), [[0, 0.25], [0.5, 1.0]])


def test_rgb_luma(tmp_path):
    (tmp_path / "r.ppm").write_bytes(b"P6\n1 1\n255\n" + bytes([255, 0, 0]))
    assert read_image(tmp_path / "r.ppm")[0, 0] == pytest.approx(0.299, abs=1e-15)
    (tmp_path / "w.ppm").write_bytes(b"P3\n2 1\n255\n255 255 255 0 0 255\n")
    np.testing.assert_allclose(read_image(tmp_path / "w.ppm"), [[1.0, 0.114]], atol=1e-15)


@pytest.mark.parametrize(
    "data,offset",
    [
        (b"P7\n1 1\n255\n\x00", 0),
        (b"P5\nx 1\n255\n\x00", 3),
        (b"P5\n2 2\n255\n\x00", 12),
        (b"P5\n1 1\n70000\n\x00", 7),
        (b"P2\n2 1\n255\n3 z\n", 13),
        (b"P5\n99999 99999\n255\n", None),
    ],
)
def test_image_parse_errors_carry_offset(tmp_path, data, offset):
    (tmp_path / "bad.pgm").write_bytes(data)
    with pytest.raises(ParseError) as info:
        read_image(tmp_path / "bad.pgm")
    if offset is not None:
        assert info.value.offset == offset
    assert "bad.pgm" in str(info.value)


def test_float_map_round_trip_with_nan(tmp_path, rng):
    m = rng.uniform(0, 80, (9, 13)).astype(np.float32).astype(np.float64)
    m[1, 2] = m[4, 4] = m[8, 0] = np.nan
    write_float_map(tmp_path / "d.pfm", m)
    back = read_float_map(tmp_path / "d.pfm")
    assert np.array_equal(np.isnan(back), np.isnan(m))
    assert back.astype(np.float32).tobytes() == m.astype(np.float32).tobytes()
    assert np.count_nonzero(np.isnan(back)) == 3


def test_float_map_golden_bytes(tmp_path):
    m = np.array([[1.0, 2.0], [3.0, np.nan]])
    write_float_map(tmp_path / "g.pfm", m, byteorder="little")
    nan = struct.pack("<f", float("nan"))
    golden = b"Pf\n2 2\n-1.0\n" + struct.pack("<ff", 3.0, 0.0)[:4] + nan + struct.pack("<ff", 1.0, 2.0)
    assert (tmp_path / "g.pfm").read_bytes() == golden


def test_float_map_cross_endian(tmp_path, rng):
    m = rng.normal(0, 5, (4, 6)).astype(np.float32).astype(np.float64)
    m[0, 0] = np.nan
    write_float_map(tmp_path / "le.pfm", m, byteorder="little")
    write_float_map(tmp_path / "be.pfm", m, byteorder="big")
    assert (tmp_path / "le.pfm").read_bytes() != (tmp_path / "be.pfm").read_bytes()
    a, b = read_float_map(tmp_path / "le.pfm"), read_float_map(tmp_path / "be.pfm")
    assert a.tobytes() == b.tobytes()


def test_float_map_errors(tmp_path):
    p = tmp_path / "x.pfm"
    p.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 12)
    with pytest.raises(ParseError, match="payload") as info:
        read_float_map(p)
    assert info.value.offset == 12
    p.write_bytes(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)
    with pytest.raises(ParseError, match="colour"):
        read_float_map(p)
    p.write_bytes(b"Pf\n1 1\n0\n" + b"\x00" * 4)
    with pytest.raises(ParseError, match="scale") as info:
        read_float_map(p)
    assert info.value.offset == 7


@settings(max_examples=300, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.sampled_from([b"P5", b"P2", b"P6", b"Pf", b""]), st.binary(max_size=40))
def test_readers_never_crash(tmp_path, magic, tail):
    p = tmp_path / "fuzz"
    p.write_bytes(magic + tail)
    for reader in (read_image, read_float_map):
        try:
            reader(p)
        except BranchStereoError:
            pass


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_minimal_annotation(tmp_path):
    p = write_json(tmp_path / "a.json", {"image_id": "s0", "width": 10, "height": 10, "branches": [{"points": [[0, 0], [4, 0], [0, 4]]}]})
    (doc,) = read_annotations(p)
    assert doc.image_id == "s0" and len(doc.branches) == 1
    assert doc.branches[0].points.shape == (3, 2)
    assert doc.branches[0].true_distance_m is None


def test_annotation_fields_and_round_trip(tmp_path):
    docs = [
        AnnotationDoc("a", 20, 10, [BranchEntry(np.array([[1, 1], [5, 1], [5, 8]], float), 1.5, "limb")]),
        AnnotationDoc("b", 20, 10, []),
    ]
    write_annotations(tmp_path / "r.json", docs)
    back = read_annotations(tmp_path / "r.json")
    assert [d.image_id for d in back] == ["a", "b"]
    assert back[0].branches[0].true_distance_m == 1.5 and back[0].branches[0].label == "limb"


def test_duplicate_points_accepted_but_flagged_by_polygon_variant(tmp_path):
    pts = [[0, 0], [6, 6], [6, 6], [6, 0], [0, 6]]
    p = write_json(tmp_path / "d.json", {"image_id": "x", "width": 8, "height": 8, "branches": [{"points": pts}]})
    (doc,) = read_annotations(p)
    assert len(doc.branches[0].points) == 5
    from branchstereo.fusion import BranchPolygon
    from branchstereo.errors import FusionError

    with pytest.raises(FusionError):
        estimate_distance_polygon(BranchPolygon(doc.branches[0].points), np.ones((8, 8)))


def test_schema_violations_enumerated(tmp_path):
    doc = {
        "image_id": "",
        "width": 10,
        "height": 10,
        "branches": [
            {"points": [[0, 0], [1, 1]]},
            {"points": [[0, 0], [4, 0], [0, 40]]},
            {"points": "nope"},
            {"points": [[0, 0], [4, 0], [0, 4]], "true_distance_m": -1},
        ],
    }
    p = write_json(tmp_path / "bad.json", doc)
    with pytest.raises(AnnotationError) as info:
        read_annotations(p)
    text = str(info.value)
    assert len(info.value.problems) == 5
    assert "branches[1]" in text and "point 2" in text
    assert "image_id" in text


def test_annotation_invalid_json(tmp_path):
    (tmp_path / "j.json").write_text('{"image_id": ')
    with pytest.raises(ParseError) as info:
        read_annotations(tmp_path / "j.json")
    assert info.value.offset == 13
