"""Binary feature/mask/parameter files and JSON manifests.

Feature file (``FSFM``)::

    magic "FSFM" | u8 version=1 | u8 dtype=1 (float32) | u8 rank=3 | 3 x u32 dims | float32 data

Mask file (``FSMK``)::

    magic "FSMK" | u8 version=1 | 2 x u32 dims (H, W) | H*W bytes in {0, 1}

Head parameters (``FSHP``)::

    magic "FSHP" | u8 version=1 | u32 d | 4 x (u8 rank | rank x u32 dims | float32 data)

All integers and floats are little-endian; arrays are row-major.
"""
import json
import struct
from pathlib import Path

import numpy as np

from .data import FoldSplit, LabeledExample
from .errors import DataError, FormatError
from .head import HeadParams

VERSION = 1
DTYPE_F32 = 1
FEATURE_MAGIC = b"FSFM"
MASK_MAGIC = b"FSMK"
PARAMS_MAGIC = b"FSHP"


class _Reader:
    def __init__(self, buf, path=None):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(
                f"truncated file: need {n} bytes for {what}, {len(self.buf) - self.pos} left",
                offset=self.pos,
                path=self.path,
            )
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what):
        return self.take(1, what)[0]

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def expect(self, magic):
        got = self.take(len(magic), "magic")
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}", offset=0, path=self.path)
        at = self.pos
        if self.u8("version") != VERSION:
            raise FormatError("unsupported version", offset=at, path=self.path)

    def f32_array(self, shape, what):
        n = int(np.prod(shape, dtype=np.int64))
        raw = self.take(4 * n, what)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)

    def finish(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{len(self.buf) - self.pos} trailing bytes", offset=self.pos, path=self.path)


def _f32_bytes(arr):
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def encode_features(features):
    f = np.asarray(features)
    if f.ndim != 3:
        raise ValueError(f"feature maps are rank 3, got shape {f.shape}")
    head = FEATURE_MAGIC + struct.pack("<BBB3I", VERSION, DTYPE_F32, 3, *f.shape)
    return head + _f32_bytes(f)


def decode_features(buf, path=None):
    rd = _Reader(buf, path)
    rd.expect(FEATURE_MAGIC)
    at = rd.pos
    if rd.u8("dtype") != DTYPE_F32:
        raise FormatError("unsupported dtype code", offset=at, path=path)
    at = rd.pos
    if rd.u8("rank") != 3:
        raise FormatError("feature maps must have rank 3", offset=at, path=path)
    dims = tuple(rd.u32("dims") for _ in range(3))
    arr = rd.f32_array(dims, "feature data")
    rd.finish()
    return arr


def encode_mask(mask):
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"masks are rank 2, got shape {m.shape}")
    return MASK_MAGIC + struct.pack("<B2I", VERSION, *m.shape) + np.ascontiguousarray(m, np.uint8).tobytes()


def decode_mask(buf, path=None):
    rd = _Reader(buf, path)
    rd.expect(MASK_MAGIC)
    h, w = rd.u32("height"), rd.u32("width")
    at = rd.pos
    m = np.frombuffer(rd.take(h * w, "mask data"), dtype=np.uint8).reshape(h, w).copy()
    if m.max(initial=0) > 1:
        bad = int(np.argmax(m > 1))
        raise FormatError("mask values must be 0 or 1", offset=at + bad, path=path)
    rd.finish()
    return m


def encode_params(params):
    out = [PARAMS_MAGIC, struct.pack("<BI", VERSION, params.d)]
    for arr in params.arrays():
        out.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(_f32_bytes(arr))
    return b"".join(out)


def decode_params(buf, path=None):
    rd = _Reader(buf, path)
    rd.expect(PARAMS_MAGIC)
    d = rd.u32("d")
    arrays = []
    for name in ("conv1_weights", "conv1_bias", "conv2_weights", "conv2_bias"):
        rank = rd.u8(f"{name} rank")
        dims = tuple(rd.u32(f"{name} dims") for _ in range(rank))
        arrays.append(rd.f32_array(dims, name))
    rd.finish()
    try:
        params = HeadParams(*arrays)
    except ValueError as exc:
        raise FormatError(f"inconsistent parameter shapes: {exc}", path=path) from None
    if params.d != d:
        raise FormatError(f"header says d={d} but conv1 expects d={params.d}", offset=5, path=path)
    return params


def _read_bytes(path):
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"missing file: {path}") from None


def write_features(path, features):
    Path(path).write_bytes(encode_features(features))


def read_features(path):
    return decode_features(_read_bytes(path), path)


def write_mask(path, mask):
    Path(path).write_bytes(encode_mask(mask))


def read_mask(path):
    return decode_mask(_read_bytes(path), path)


def write_params(path, params):
    Path(path).write_bytes(encode_params(params))


def read_params(path):
    return decode_params(_read_bytes(path), path)


def write_dataset(root, dataset, manifest_name="manifest.json"):
    """Write every example as feature/mask files plus a manifest; returns the manifest path."""
    root = Path(root)
    (root / "features").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for i, ex in enumerate(dataset):
        stem = f"c{ex.class_id:03d}_{i:05d}"
        fpath = Path("features") / f"{stem}.fsfm"
        mpath = Path("masks") / f"{stem}.fsmk"
        write_features(root / fpath, ex.features)
        write_mask(root / mpath, ex.mask)
        entries.append({"class_id": int(ex.class_id), "features": fpath.as_posix(), "mask": mpath.as_posix()})
    manifest = root / manifest_name
    manifest.write_text(json.dumps(entries, indent=1) + "\n", encoding="utf-8")
    return manifest


def read_manifest(path):
    """Load a dataset from a JSON manifest; relative paths resolve against its directory."""
    path = Path(path)
    try:
        entries = json.loads(_read_bytes(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(entries, list):
        raise DataError(f"{path}: manifest must be a JSON array")
    base = path.parent
    out = []
    for n, e in enumerate(entries):
        try:
            cid, fpath, mpath = int(e["class_id"]), e["features"], e["mask"]
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{path}: entry {n} needs class_id, features and mask") from None
        if cid < 0:
            raise DataError(f"{path}: entry {n} has negative class_id")
        feats = read_features(base / fpath)
        mask = read_mask(base / mpath)
        out.append(LabeledExample(cid, feats, mask))
    dims = {ex.d for ex in out}
    if len(dims) > 1:
        raise DataError(f"{path}: examples have mixed feature dims {sorted(dims)}")
    return out


def fold_to_json(split):
    return {
        "fold": split.fold_index,
        "test_classes": sorted(split.test_classes),
        "train_classes": sorted(split.train_classes),
    }


def write_folds(path, folds):
    Path(path).write_text(json.dumps([fold_to_json(f) for f in folds], indent=1) + "\n", encoding="utf-8")


def read_folds(path):
    """Folds file: one fold object or an array of them."""
    path = Path(path)
    try:
        raw = json.loads(_read_bytes(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(raw, dict):
        raw = [raw]
    try:
        return [FoldSplit(int(r["fold"]), r["test_classes"], r["train_classes"]) for r in raw]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed fold entry ({exc})") from None
