"""Binary container shared by dataset and weight files.

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON header,
then raw payload blocks. The header's ``checksum`` is the CRC-32 of the
concatenated payload blocks.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Sequence

__all__ = [
    "FileFormatError", "VersionMismatchError", "ChecksumError", "IntegrityError",
    "write_container", "read_container", "verify_checksum",
]


class FileFormatError(ValueError):
    pass


class VersionMismatchError(FileFormatError):
    pass


class ChecksumError(FileFormatError):
    pass


class IntegrityError(FileFormatError):
    """Payload size disagrees with the header (e.g. truncation)."""


def write_container(path, magic: bytes, header: dict, blocks: Sequence[bytes]) -> None:
    crc = 0
    for b in blocks:
        crc = zlib.crc32(b, crc)
    header = dict(header, checksum=crc)
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for b in blocks:
            fh.write(b)


def read_container(path, magic: bytes, version: int) -> tuple[dict, bytes]:
    """Return ``(header, payload)`` after magic, version and CRC checks."""
    data = Path(path).read_bytes()
    if data[: len(magic)] != magic:
        raise FileFormatError(f"{path}: not a {magic.decode(errors='replace')} file (bad magic)")
    pos = len(magic)
    if len(data) < pos + 4:
        raise IntegrityError(f"{path}: truncated header")
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) < pos + hlen:
        raise IntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(data[pos: pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: unreadable header ({exc})") from None
    if header.get("version") != version:
        raise VersionMismatchError(
            f"{path}: format version {header.get('version')!r}, expected {version}"
        )
    payload = data[pos + hlen:]
    return header, payload


def verify_checksum(path, header: dict, payload: bytes) -> None:
    if zlib.crc32(payload) != header.get("checksum"):
        raise ChecksumError(f"{path}: checksum mismatch")
