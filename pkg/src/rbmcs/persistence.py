"""Binary model container.

Layout (all integers little-endian)::

    b"CSRBM1"                 magic
    uint16  version           currently 1
    uint32  record count
    per record:
        uint16  name length, name (UTF-8)
        uint8   rank
        uint64  dims[rank]
        float64 values[prod(dims)]   row-major

Text (the JSON config echo) is stored as a rank-1 record of byte values.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .rbm import RbmModel
from .transforms import SparsifyingModel

MAGIC = b"CSRBM1"
VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ModelBundle:
    sparsifier: SparsifyingModel
    rbm: RbmModel
    coeff_variances: np.ndarray
    repr_error_variances: np.ndarray
    never_active: frozenset = frozenset()
    config: dict = field(default_factory=dict)


def _text_record(text):
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float64)


def write_arrays(path, arrays):
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8", order="C")
        key = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(key)) + key)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_arrays(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a CSRBM1 model file")
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise ModelFormatError(f"{path}: truncated model file")
        out = blob[pos:pos + n]
        pos += n
        return out

    version, count = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise ModelFormatError(f"{path}: container version {version}, expected {VERSION}")
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        arrays[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(dims).copy()
    if pos != len(blob):
        raise ModelFormatError(f"{path}: trailing bytes after last record")
    return arrays


def save_model(path, bundle):
    meta = dict(bundle.config)
    meta["kind"] = bundle.sparsifier.kind
    meta["levels"] = bundle.sparsifier.levels
    write_arrays(path, {
        "synthesis": bundle.sparsifier.synthesis,
        "rbm.weights": bundle.rbm.weights,
        "rbm.visible_bias": bundle.rbm.visible_bias,
        "rbm.hidden_bias": bundle.rbm.hidden_bias,
        "coeff_variances": bundle.coeff_variances,
        "repr_error_variances": bundle.repr_error_variances,
        "never_active": np.array(sorted(bundle.never_active), dtype=float),
        "config": _text_record(json.dumps(meta, sort_keys=True)),
    })


def load_model(path):
    arrays = read_arrays(path)
    try:
        meta = json.loads(bytes(arrays["config"].astype(np.uint8)).decode("utf-8"))
        kind = meta.pop("kind")
        levels = int(meta.pop("levels"))
        sparsifier = SparsifyingModel(kind=kind, synthesis=arrays["synthesis"], levels=levels)
        rbm = RbmModel(arrays["rbm.weights"], arrays["rbm.visible_bias"], arrays["rbm.hidden_bias"])
        never = frozenset(int(i) for i in arrays["never_active"])
        return ModelBundle(sparsifier=sparsifier, rbm=rbm,
                           coeff_variances=arrays["coeff_variances"],
                           repr_error_variances=arrays["repr_error_variances"],
                           never_active=never, config=meta)
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing record {exc}") from exc
