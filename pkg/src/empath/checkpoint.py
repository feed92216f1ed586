"""Versioned binary checkpoint container.

Layout: magic, version, canonical config text, training metadata, named
float64 tensors (little-endian), vocab hash, then a SHA-256 of everything
before it. Save -> load -> save is byte-identical.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct

import numpy as np

from .autodiff import Tensor
from .encoder import EncoderConfig
from .model import BiEncoderModel

MAGIC = b"EMPATHCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class VocabHashMismatchError(CheckpointError):
    pass


def _write_block(buf, data: bytes):
    buf.write(struct.pack("<Q", len(data)))
    buf.write(data)


def _read_block(buf) -> bytes:
    header = buf.read(8)
    if len(header) != 8:
        raise CheckpointCorruptError("truncated checkpoint: missing block header")
    (n,) = struct.unpack("<Q", header)
    data = buf.read(n)
    if len(data) != n:
        raise CheckpointCorruptError("truncated checkpoint: short block")
    return data


def _config_text(model: BiEncoderModel) -> str:
    cfg = model.config
    items = {
        "mechanism": model.mechanism,
        "num_layers": cfg.num_layers,
        "num_heads": cfg.num_heads,
        "model_dim": cfg.model_dim,
        "ff_dim": cfg.ff_dim,
        "max_len": cfg.max_len,
        "vocab_size": cfg.vocab_size,
        "dropout_prob": cfg.dropout_prob,
        "use_attention": model.use_attention,
        "use_seeker": model.use_seeker,
    }
    return "\n".join(f"{k} = {items[k]}" for k in sorted(items)) + "\n"


def _parse_config(text: str) -> dict:
    out = {}
    for line in text.strip().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


def save_checkpoint(model: BiEncoderModel, path, vocab_hash: str, metadata: dict | None = None):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _write_block(buf, _config_text(model).encode("utf-8"))
    _write_block(buf, json.dumps(metadata or {}, sort_keys=True).encode("utf-8"))
    params = model.parameters()
    buf.write(struct.pack("<I", len(params)))
    for name in sorted(params):
        t = params[name]
        _write_block(buf, name.encode("utf-8"))
        buf.write(struct.pack("<I", t.data.ndim))
        for dim in t.data.shape:
            buf.write(struct.pack("<Q", dim))
        buf.write(t.data.astype("<f8").tobytes())
    _write_block(buf, vocab_hash.encode("utf-8"))
    payload = buf.getvalue()
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as f:
        f.write(payload)
        f.write(digest)


def load_checkpoint(path, expected_vocab_hash: str | None = None):
    """Returns (model, metadata). Verifies integrity, version, and vocab hash."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 4 + 32:
        raise CheckpointCorruptError("file too short to be a checkpoint")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointCorruptError("checksum mismatch: checkpoint is corrupt")
    buf = io.BytesIO(payload)
    if buf.read(len(MAGIC)) != MAGIC:
        raise CheckpointCorruptError("bad magic: not a checkpoint file")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    cfg_raw = _parse_config(_read_block(buf).decode("utf-8"))
    metadata = json.loads(_read_block(buf).decode("utf-8"))
    (n_params,) = struct.unpack("<I", buf.read(4))
    tensors = {}
    for _ in range(n_params):
        name = _read_block(buf).decode("utf-8")
        (ndim,) = struct.unpack("<I", buf.read(4))
        shape = tuple(struct.unpack("<Q", buf.read(8))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(buf.read(count * 8), dtype="<f8").reshape(shape).copy()
        tensors[name] = Tensor(data, requires_grad=True)
    vocab_hash = _read_block(buf).decode("utf-8")
    if expected_vocab_hash is not None and vocab_hash != expected_vocab_hash:
        raise VocabHashMismatchError(
            "checkpoint was trained with a different vocabulary "
            f"(stored {vocab_hash[:12]}..., expected {expected_vocab_hash[:12]}...)"
        )

    config = EncoderConfig(
        num_layers=int(cfg_raw["num_layers"]),
        num_heads=int(cfg_raw["num_heads"]),
        model_dim=int(cfg_raw["model_dim"]),
        ff_dim=int(cfg_raw["ff_dim"]),
        max_len=int(cfg_raw["max_len"]),
        vocab_size=int(cfg_raw["vocab_size"]),
        dropout_prob=float(cfg_raw["dropout_prob"]),
    )
    use_attention = cfg_raw["use_attention"] == "True"
    use_seeker = cfg_raw["use_seeker"] == "True"
    s_params = {k[len("s.") :]: v for k, v in tensors.items() if k.startswith("s.")}
    r_params = {k[len("r.") :]: v for k, v in tensors.items() if k.startswith("r.")}
    head_params = {k[len("head.") :]: v for k, v in tensors.items() if k.startswith("head.")}
    model = BiEncoderModel(
        mechanism=cfg_raw["mechanism"],
        config=config,
        s_params=s_params,
        r_params=r_params,
        head_params=head_params,
        use_attention=use_attention,
        use_seeker=use_seeker,
    )
    model._vocab_hash = vocab_hash
    return model, metadata


def checkpoint_hash(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()
