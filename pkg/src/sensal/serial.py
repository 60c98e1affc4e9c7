"""Binary tensor-record container used by model bundles and window stores.

Layout (all integers little-endian):
  8-byte magic | u32 format version | u32 header length | header (UTF-8 JSON,
  sorted keys) | tensor records | 8-byte checksum over all preceding bytes.

Each tensor record: u32 name length, name bytes, u32 rank, u32 per-axis
extent, then the payload as raw little-endian float32.
"""

import hashlib
import json
import struct

import numpy as np

MAGIC = b"EBALNET1"
VERSION = 1


class SerializationError(ValueError):
    pass


class BadMagic(SerializationError):
    pass


class VersionMismatch(SerializationError):
    pass


class ChecksumError(SerializationError):
    pass


class TruncatedPayload(SerializationError):
    pass


def _checksum(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()[:8]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def pack(header: dict, tensors: list[tuple[str, np.ndarray]]) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    head = canonical_json(header).encode("utf-8")
    parts.append(struct.pack("<I", len(head)))
    parts.append(head)
    for name, arr in tensors:
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + _checksum(body)


def unpack(data: bytes) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    if len(data) < len(MAGIC) + 4 + 4 + 8:
        raise TruncatedPayload(f"container too short ({len(data)} bytes)")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"bad magic {data[:len(MAGIC)]!r}")
    body, check = data[:-8], data[-8:]
    if _checksum(body) != check:
        raise ChecksumError("checksum mismatch")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != VERSION:
        raise VersionMismatch(f"format version {version}, expected {VERSION}")
    (hlen,) = struct.unpack_from("<I", body, off)
    off += 4
    if off + hlen > len(body):
        raise TruncatedPayload("truncated header")
    header = json.loads(body[off : off + hlen].decode("utf-8"))
    off += hlen
    tensors = []
    while off < len(body):
        try:
            (nlen,) = struct.unpack_from("<I", body, off)
            off += 4
            name = body[off : off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", body, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}I", body, off)
            off += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            raw = body[off : off + 4 * count]
            if len(raw) < 4 * count:
                raise TruncatedPayload(f"truncated payload for tensor {name!r}")
            off += 4 * count
        except struct.error as exc:
            raise TruncatedPayload(str(exc)) from exc
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
        tensors.append((name, arr))
    return header, tensors
