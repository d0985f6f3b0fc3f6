"""
Binary parameter checkpoints.

Layout (little-endian):
    magic b"S2PK" | version u16 | tensor count u32
    per tensor: name length u16 | name utf-8 | ndim u8 | shape u32 * ndim | float64 data
Tensors are written in declaration order.
"""

import struct
from pathlib import Path

import numpy as np

from .validators import IntegrityError, MalformedInputError

MAGIC = b"S2PK"
VERSION = 1


def save_checkpoint(state, path):
    """
    Write an ordered name -> array mapping.

    Args:
        state: Mapping of parameter name to array (order preserved)
        path: Output file
    """
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(state))]
    for name, value in state.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype="<f8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    return path


def load_checkpoint(path):
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        Dict name -> float64 array in file order

    Raises:
        MalformedInputError: Wrong magic or unsupported version.
        IntegrityError: File truncated or carrying trailing bytes.
    """
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise MalformedInputError(f"{path}: not a checkpoint (magic {data[:4]!r})")

    offset = 4

    def take(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise IntegrityError(f"{path}: truncated at byte {offset}")
        out = struct.unpack_from(fmt, data, offset)
        offset += size
        return out

    version, count = take("<HI")
    if version != VERSION:
        raise MalformedInputError(f"{path}: unsupported checkpoint version {version}")

    state = {}
    for _ in range(count):
        (name_len,) = take("<H")
        name = bytes(take(f"<{name_len}s")[0]).decode("utf-8")
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I") if ndim else ()
        n = int(np.prod(shape, dtype=np.int64))
        if offset + 8 * n > len(data):
            raise IntegrityError(f"{path}: truncated at byte {offset}")
        values = np.frombuffer(data, "<f8", n, offset) if n else np.zeros(0)
        offset += 8 * n
        state[name] = values.astype(np.float64).reshape(shape)

    if offset != len(data):
        raise IntegrityError(f"{path}: {len(data) - offset} trailing bytes")
    return state
