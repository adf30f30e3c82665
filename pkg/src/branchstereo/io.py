"""File formats: Netpbm images, PFM float maps, JSON annotations.

The layouts are described in ``docs/formats.md``.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AnnotationError, ParseError
from .geometry import load_rig, save_rig

__all__ = [
    "LUMA_WEIGHTS",
    "read_image",
    "write_image",
    "read_float_map",
    "write_float_map",
    "BranchEntry",
    "AnnotationDoc",
    "read_annotations",
    "write_annotations",
    "load_rig",
    "save_rig",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_WHITESPACE = b" \t\n\r\v\f"


class _HeaderReader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def fail(self, message, offset=None):
        raise ParseError(message, self.pos if offset is None else offset, self.path)

    def skip_space(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos : self.pos + 1]
            if c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            elif c in _WHITESPACE:
                self.pos += 1
            else:
                break

    def token(self) -> bytes:
        self.skip_space()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos : self.pos + 1] not in _WHITESPACE:
            if self.data[self.pos : self.pos + 1] == b"#":
                break
            self.pos += 1
        if self.pos == start:
            self.fail("unexpected end of header")
        return self.data[start : self.pos]

    def integer(self, what) -> int:
        self.skip_space()
        start = self.pos
        tok = self.token()
        if not tok.isdigit():
            self.fail(f"{what} is not a positive integer: {tok!r}", start)
        return int(tok)

    def end_of_header(self):
        # Exactly one whitespace byte separates the header from the raster.
        if self.pos >= len(self.data) or self.data[self.pos : self.pos + 1] not in _WHITESPACE:
            self.fail("missing whitespace after header")
        self.pos += 1


def read_image(path) -> np.ndarray:
    """Read a PGM/PPM (P2, P3, P5, P6; 8- or 16-bit) as float64 gray in [0, 1].

    Colour images are converted with ``LUMA_WEIGHTS`` after scaling each
    channel to [0, 1].
    """
    data = Path(path).read_bytes()
    hdr = _HeaderReader(data, path)
    magic = hdr.token()
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        hdr.fail(f"unsupported magic {magic!r}", 0)
    width = hdr.integer("width")
    height = hdr.integer("height")
    hdr.skip_space()
    maxval_at = hdr.pos
    maxval = hdr.integer("maxval")
    if width == 0 or height == 0:
        hdr.fail("zero image dimension")
    if not 0 < maxval < 65536:
        hdr.fail(f"maxval {maxval} out of range", maxval_at)
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if count > 1 << 31:
        hdr.fail(f"image dimensions {width}x{height} too large")
    if magic in (b"P5", b"P6"):
        hdr.end_of_header()
        size = 2 if maxval > 255 else 1
        need = count * size
        raster = data[hdr.pos : hdr.pos + need]
        if len(raster) < need:
            raise ParseError(f"raster truncated: need {need} bytes, have {len(raster)}", hdr.pos + len(raster), path)
        values = np.frombuffer(raster, dtype=">u2" if size == 2 else np.uint8).astype(np.int64)
    else:
        vals = []
        for _ in range(count):
            hdr.skip_space()
            start = hdr.pos
            try:
                tok = hdr.token()
            except ParseError:
                raise ParseError(f"raster truncated after {len(vals)} of {count} samples", hdr.pos, path) from None
            if not tok.isdigit():
                raise ParseError(f"bad sample {tok!r}", start, path)
            vals.append(int(tok))
        values = np.array(vals, dtype=np.int64)
    if values.max(initial=0) > maxval:
        raise ParseError(f"sample exceeds maxval {maxval}", hdr.pos, path)
    img = values.astype(np.float64) / maxval
    if channels == 3:
        rgb = img.reshape(height, width, 3)
        r, g, b = LUMA_WEIGHTS
        return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return img.reshape(height, width)


def write_image(path, image, bits: int = 8) -> None:
    """Write a [0, 1] gray image as binary PGM, rounding to ``bits`` (8 or 16)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("write_image expects a 2-D gray image")
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = (1 << bits) - 1
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    payload = q.astype(">u2" if bits == 16 else np.uint8).tobytes()
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + payload)


def read_float_map(path) -> np.ndarray:
    """Read a single-channel PFM map as float64 (NaN = invalid).

    Rows are stored bottom-to-top.  A negative scale means little-endian
    payload, positive big-endian; both are accepted.
    """
    data = Path(path).read_bytes()
    hdr = _HeaderReader(data, path)
    magic = hdr.token()
    if magic == b"PF":
        hdr.fail("colour PFM (PF) is not a disparity/depth map", 0)
    if magic != b"Pf":
        hdr.fail(f"not a PFM file (magic {magic!r})", 0)
    width = hdr.integer("width")
    height = hdr.integer("height")
    hdr.skip_space()
    scale_at = hdr.pos
    tok = hdr.token()
    try:
        scale = float(tok)
    except ValueError:
        hdr.fail(f"bad scale {tok!r}", scale_at)
    if scale == 0 or not math.isfinite(scale):
        hdr.fail("scale must be finite and non-zero", scale_at)
    hdr.end_of_header()
    need = width * height * 4
    payload = data[hdr.pos :]
    if len(payload) != need:
        raise ParseError(
            f"payload is {len(payload)} bytes, header {width}x{height} needs {need}", hdr.pos, path
        )
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)[::-1]
    return arr.astype(np.float64)


def write_float_map(path, values, byteorder: str | None = None) -> None:
    """Write a map as single-channel PFM (float32, bottom-to-top rows).

    ``byteorder`` is ``"little"`` or ``"big"``; default is the host order.
    Values are rounded to float32, so float32 inputs round-trip exactly.
    """
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("float maps must be 2-D")
    byteorder = byteorder or sys.byteorder
    if byteorder not in ("little", "big"):
        raise ValueError("byteorder must be 'little' or 'big'")
    dtype = "<f4" if byteorder == "little" else ">f4"
    scale = "-1.0" if byteorder == "little" else "1.0"
    header = f"Pf\n{arr.shape[1]} {arr.shape[0]}\n{scale}\n".encode("ascii")
    payload = np.ascontiguousarray(arr[::-1], dtype=dtype).tobytes()
    Path(path).write_bytes(header + payload)


@dataclass
class BranchEntry:
    points: np.ndarray
    true_distance_m: float | None = None
    label: str | None = None


@dataclass
class AnnotationDoc:
    image_id: str
    width: int
    height: int
    branches: list = field(default_factory=list)


def _check_doc(raw, where, problems):
    if not isinstance(raw, dict):
        problems.append(f"{where}: expected an object")
        return None
    image_id = raw.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        problems.append(f"{where}: 'image_id' must be a non-empty string")
    size = []
    for key in ("width", "height"):
        val = raw.get(key)
        if not isinstance(val, int) or isinstance(val, bool) or val <= 0:
            problems.append(f"{where}: '{key}' must be a positive integer")
        size.append(val)
    branches_raw = raw.get("branches")
    if not isinstance(branches_raw, list):
        problems.append(f"{where}: 'branches' must be a list")
        return None
    branches = []
    for j, br in enumerate(branches_raw):
        bw = f"{where}.branches[{j}]"
        if not isinstance(br, dict):
            problems.append(f"{bw}: expected an object")
            continue
        pts = br.get("points")
        if not isinstance(pts, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)
            for p in pts
        ):
            problems.append(f"{bw}: 'points' must be a list of [x, y] number pairs")
            continue
        if len(pts) < 3:
            problems.append(f"{bw}: polygon has {len(pts)} points, need at least 3")
            continue
        arr = np.array(pts, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            problems.append(f"{bw}: non-finite coordinate")
            continue
        w, h = size
        if isinstance(w, int) and isinstance(h, int):
            bad = np.nonzero((arr[:, 0] < 0) | (arr[:, 0] > w) | (arr[:, 1] < 0) | (arr[:, 1] > h))[0]
            if len(bad):
                problems.append(f"{bw}: point {int(bad[0])} {pts[bad[0]]} outside the {w}x{h} image")
                continue
        dist = br.get("true_distance_m")
        if dist is not None and (not isinstance(dist, (int, float)) or isinstance(dist, bool) or not dist > 0):
            problems.append(f"{bw}: 'true_distance_m' must be a positive number")
            continue
        label = br.get("label")
        if label is not None and not isinstance(label, str):
            problems.append(f"{bw}: 'label' must be a string")
            continue
        branches.append(BranchEntry(arr, None if dist is None else float(dist), label))
    return AnnotationDoc(image_id, size[0], size[1], branches)


def read_annotations(path) -> list:
    """Read and validate an annotation file.

    The top level is one document object or a list of them.

    Raises:
        AnnotationError: listing every schema violation found.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.pos, path) from None
    docs_raw = raw if isinstance(raw, list) else [raw]
    problems = []
    docs = []
    for i, d in enumerate(docs_raw):
        doc = _check_doc(d, f"document[{i}]", problems)
        if doc is not None:
            docs.append(doc)
    if problems:
        raise AnnotationError(problems, path)
    return docs


def write_annotations(path, docs) -> None:
    out = []
    for doc in docs:
        branches = []
        for br in doc.branches:
            entry = {"points": [[float(x), float(y)] for x, y in br.points]}
            if br.true_distance_m is not None:
                entry["true_distance_m"] = br.true_distance_m
            if br.label is not None:
                entry["label"] = br.label
            branches.append(entry)
        out.append({"image_id": doc.image_id, "width": doc.width, "height": doc.height, "branches": branches})
    Path(path).write_text(json.dumps(out if len(out) != 1 else out[0], indent=2) + "\n")
