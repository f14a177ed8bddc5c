"""Binary weight checkpoints with a JSON layer-spec sidecar.

Format: the magic string ``FSINNET1``, then for every parameter tensor in
layer order: a length-prefixed UTF-8 name (uint32 LE), the rank (uint32
LE), the shape entries (uint32 LE each), and the values as little-endian
64-bit floats. The sidecar ``<path>.spec.json`` lists the layer specs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .layers import spec_from_dict
from .network import Network

__all__ = ["save_checkpoint", "load_checkpoint", "sidecar_path"]

MAGIC = b"FSINNET1"


def sidecar_path(path) -> Path:
    return Path(str(path) + ".spec.json")


def save_checkpoint(network: Network, destination) -> None:
    """Write weights to ``destination`` and the specs to its sidecar."""
    destination = Path(destination)
    with open(destination, "wb") as f:
        f.write(MAGIC)
        for name, value in network.parameters().items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", value.ndim))
            f.write(struct.pack(f"<{value.ndim}I", *value.shape))
            f.write(value.astype("<f8").tobytes())
    sidecar = [spec.to_dict() for spec in network.specs]
    sidecar_path(destination).write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise CheckpointError(f"truncated file while reading {what}")
    return data


def load_checkpoint(source) -> Network:
    """Rebuild a network from a checkpoint and its sidecar."""
    source = Path(source)
    side = sidecar_path(source)
    if not side.exists():
        raise CheckpointError(f"missing layer-spec sidecar {side}")
    try:
        spec_dicts = json.loads(side.read_text(encoding="utf-8"))
        specs = [spec_from_dict(d) for d in spec_dicts]
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"malformed sidecar {side}: {exc}")

    network = Network(specs)
    expected = network.parameters()

    with open(source, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        loaded = {}
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise CheckpointError("truncated file while reading a parameter name length")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "a parameter name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, f"rank of {name}"))
            shape = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, f"shape of {name}"))
            count = int(np.prod(shape, dtype=np.int64)) if rank else 1
            data = _read_exact(f, 8 * count, f"values of {name}")
            loaded[name] = np.frombuffer(data, dtype="<f8").reshape(shape).astype(np.float64)

    if set(loaded) != set(expected):
        missing = sorted(set(expected) - set(loaded))
        extra = sorted(set(loaded) - set(expected))
        raise CheckpointError(
            f"parameter set does not match the sidecar specs "
            f"(missing {missing}, unexpected {extra})"
        )
    for name, value in loaded.items():
        if value.shape != expected[name].shape:
            raise CheckpointError(
                f"shape mismatch for {name}: file has {value.shape}, "
                f"specs need {expected[name].shape}"
            )
        expected[name][...] = value
    return network
