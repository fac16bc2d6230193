"""Versioned binary container with a JSON text header and CRC32-checked
records. Datasets use magic ``USDM``, checkpoints ``USCK``; all numeric
payloads are little-endian. Write -> read round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

__all__ = [
    "ContainerError",
    "CorruptRecordError",
    "write_container",
    "read_container",
    "DATASET_MAGIC",
    "CHECKPOINT_MAGIC",
    "FORMAT_VERSION",
]

DATASET_MAGIC = b"USDM"
CHECKPOINT_MAGIC = b"USCK"
FORMAT_VERSION = 1


class ContainerError(RuntimeError):
    pass


class CorruptRecordError(ContainerError):
    def __init__(self, index: int, path):
        self.index = index
        super().__init__(f"record {index} of {path} failed its CRC32 check")


def write_container(path, magic: bytes, header: dict, records: list):
    """``records`` is a list of bytes payloads; ``header`` must be JSON-safe."""
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(struct.pack("<Q", len(records)))
        for payload in records:
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)
            fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ContainerError(f"truncated file {path}: expected {n} bytes for {what}")
    return data


def read_container(path, magic: bytes):
    """Returns (header dict, list of payload bytes); verifies magic, version
    and every record checksum before returning anything."""
    path = Path(path)
    with open(path, "rb") as fh:
        got = _read_exact(fh, 4, path, "magic")
        if got != magic:
            raise ContainerError(f"bad magic {got!r} in {path}, expected {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version != FORMAT_VERSION:
            raise ContainerError(
                f"unsupported format version {version} in {path} (reader supports {FORMAT_VERSION})"
            )
        (hlen,) = struct.unpack("<Q", _read_exact(fh, 8, path, "header length"))
        header = json.loads(_read_exact(fh, hlen, path, "header"))
        (n_records,) = struct.unpack("<Q", _read_exact(fh, 8, path, "record count"))
        records = []
        for i in range(n_records):
            (plen,) = struct.unpack("<Q", _read_exact(fh, 8, path, f"record {i} length"))
            payload = _read_exact(fh, plen, path, f"record {i}")
            (crc,) = struct.unpack("<I", _read_exact(fh, 4, path, f"record {i} checksum"))
            if zlib.crc32(payload) & 0xFFFFFFFF != crc:
                raise CorruptRecordError(i, path)
            records.append(payload)
    return header, records
