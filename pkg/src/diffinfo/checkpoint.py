"""Versioned binary checkpoints: a JSON header followed by packed float64 arrays.

Layout: 4-byte magic, little-endian uint32 version, little-endian uint64
header length, the UTF-8 JSON header, then the raw C-order little-endian
float64 bytes of each array in the order the header declares.  Raw float64
bytes make the round trip bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .denoise import GmmSpec
from .mlp import MlpDenoiser

MAGIC = b"DINF"
VERSION = 1


def _pack(kind: str, meta: dict, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    header = dict(meta)
    header["kind"] = kind
    header["arrays"] = [{"name": name, "shape": list(a.shape)} for name, a in arrays]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(blob)), blob]
    for _, a in arrays:
        out.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(out)


def save_checkpoint(obj, path) -> None:
    """Serialize a :class:`GmmSpec` or :class:`MlpDenoiser` to ``path``."""
    if isinstance(obj, GmmSpec):
        meta = {
            "dim": obj.dim,
            "n_components": obj.n_components,
            "condition_map": {t: list(v) for t, v in obj.condition_map.items()},
        }
        arrays = [
            ("weights", obj.weights),
            ("means", obj.means),
            ("covariances", obj.covariances),
        ]
        data = _pack("gmm", meta, arrays)
    elif isinstance(obj, MlpDenoiser):
        meta = {
            "dim": obj.dim,
            "vocabulary": list(obj.vocabulary),
            "n_frequencies": obj.n_frequencies,
            "frequency_base": obj.frequency_base,
            "layer_widths": list(obj.layer_widths),
        }
        arrays = []
        for i, (w, b) in enumerate(obj.layers):
            arrays.append((f"w{i}", w))
            arrays.append((f"b{i}", b))
        data = _pack("mlp", meta, arrays)
    else:
        raise TypeError(f"cannot checkpoint objects of type {type(obj).__name__}")
    Path(path).write_bytes(data)


def load_checkpoint(path):
    """Load a checkpoint back into a :class:`GmmSpec` or :class:`MlpDenoiser`."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path} is not a diffinfo checkpoint (bad magic)")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    offset = 16 + header_len
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = arr.copy()
        offset += count * 8
    if header["kind"] == "gmm":
        return GmmSpec(
            weights=arrays["weights"],
            means=arrays["means"],
            covariances=arrays["covariances"],
            condition_map={t: tuple(v) for t, v in header["condition_map"].items()},
        )
    if header["kind"] == "mlp":
        n_layers = len(header["layer_widths"]) - 1
        layers = [(arrays[f"w{i}"], arrays[f"b{i}"]) for i in range(n_layers)]
        return MlpDenoiser(
            layers,
            dim=header["dim"],
            vocabulary=header["vocabulary"],
            n_frequencies=header["n_frequencies"],
            frequency_base=header["frequency_base"],
        )
    raise ValueError(f"unknown checkpoint kind {header['kind']!r}")
