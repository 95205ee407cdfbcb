"""Binary model checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic b"HYPDCKPT"
    uint32    format version
    uint32    header length N
    N bytes   UTF-8 JSON header (sorted keys, compact separators)
    ...       tensor values as '<f8', in header order, row-major

The header carries the run configuration snapshot, the encoder config, the
seed, tensor names/shapes and the best validation MRR / epoch.  Floats in the
JSON use Python's shortest round-trip repr, so save -> load -> save is
byte-identical.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoders import EncoderConfig, check_params, init_encoder

MAGIC = b"HYPDCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    encoder: EncoderConfig
    params: object
    seed: int = 0
    run_config: dict = field(default_factory=dict)
    best_val_mrr: float = float("nan")
    best_epoch: int = 0
    epochs_trained: int = 0


def to_bytes(ckpt: Checkpoint) -> bytes:
    tensors = ckpt.params.tensors()
    enc = asdict(ckpt.encoder)
    enc["cnn_filter_widths"] = list(enc["cnn_filter_widths"])
    header = {
        "encoder": enc,
        "seed": int(ckpt.seed),
        "run_config": ckpt.run_config,
        "best_val_mrr": float(ckpt.best_val_mrr),
        "best_epoch": int(ckpt.best_epoch),
        "epochs_trained": int(ckpt.epochs_trained),
        "tensors": [{"name": p.name, "shape": list(p.shape)} for p in tensors],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    parts.extend(np.ascontiguousarray(p.values, dtype="<f8").tobytes() for p in tensors)
    return b"".join(parts)


def from_bytes(data: bytes) -> Checkpoint:
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < 16:
        raise CheckpointError("truncated checkpoint")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    enc = EncoderConfig(**header["encoder"])
    params = init_encoder(enc, header["seed"])
    tensors = params.tensors()
    entries = header["tensors"]
    if [e["name"] for e in entries] != [p.name for p in tensors]:
        raise CheckpointError("tensor list does not match the encoder config")
    offset = 16 + hlen
    for entry, p in zip(entries, tensors):
        if tuple(entry["shape"]) != p.shape:
            raise CheckpointError(f"tensor {p.name} shape {entry['shape']} != {list(p.shape)}")
        nbytes = 8 * p.size
        chunk = data[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError("truncated checkpoint")
        p.values[...] = np.frombuffer(chunk, dtype="<f8").reshape(p.shape)
        offset += nbytes
    if offset != len(data):
        raise CheckpointError("trailing bytes after tensor data")
    check_params(enc, params)
    return Checkpoint(enc, params, header["seed"], header["run_config"], header["best_val_mrr"],
                      header["best_epoch"], header["epochs_trained"])


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
