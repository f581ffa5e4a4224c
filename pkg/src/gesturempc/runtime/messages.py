"""Framed wire format for multi-party sessions.

Every message is one frame:

    u32 length   (big-endian, bytes after this field)
    u8  kind
    u64 session id (big-endian)
    u64 sequence  (big-endian, strictly increasing per sender->receiver)
    payload bytes

Array payloads pack uint64 planes as: u16 array count, then per array
u8 ndim + ndim u32 dims + little-endian words.  The framing layer knows
nothing about protocol semantics; sequencing is validated by the
endpoints.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

HEADER = struct.Struct(">IBQQ")  # length covers kind + session + seq + payload
MAX_FRAME = 1 << 30


class FramingError(ValueError):
    """Malformed or truncated frame."""


class Kind(enum.IntEnum):
    CONTROL = 0
    SHARE_DELIVERY = 1
    OPENING = 2
    TRIPLE_REQUEST = 3
    TRIPLE = 4
    COMPARISON_RANDOMNESS = 5
    REVEAL_GRANT = 6


@dataclass
class Message:
    kind: Kind
    session_id: int
    seq: int
    payload: bytes = b""


def encode_message(msg: Message) -> bytes:
    length = 1 + 8 + 8 + len(msg.payload)
    if length > MAX_FRAME:
        raise FramingError(f"frame of {length} bytes exceeds the cap")
    return HEADER.pack(length, int(msg.kind), msg.session_id, msg.seq) + msg.payload


def decode_message(frame: bytes) -> Message:
    if len(frame) < HEADER.size:
        raise FramingError("short frame header")
    length, kind, session_id, seq = HEADER.unpack_from(frame, 0)
    if length != len(frame) - 4:
        raise FramingError(f"length field {length} does not match frame size")
    try:
        kind = Kind(kind)
    except ValueError as exc:
        raise FramingError(f"unknown message kind {kind}") from exc
    return Message(kind=kind, session_id=session_id, seq=seq,
                   payload=frame[HEADER.size:])


def read_frame(read_exact) -> bytes:
    """Assemble one frame from a read_exact(n) -> bytes callable."""
    head = read_exact(4)
    (length,) = struct.unpack(">I", head)
    if length > MAX_FRAME or length < 17:
        raise FramingError(f"implausible frame length {length}")
    return head + read_exact(length)


def pack_arrays(arrays: list) -> bytes:
    parts = [struct.pack("<H", len(arrays))]
    for arr in arrays:
        arr = np.asarray(arr, dtype=np.uint64)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(arr.astype("<u8").tobytes())
    return b"".join(parts)


def unpack_arrays(payload: bytes) -> list:
    (count,) = struct.unpack_from("<H", payload, 0)
    pos = 2
    out = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<B", payload, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", payload, pos) if ndim else ()
        pos += 4 * ndim
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<u8", count=n, offset=pos).reshape(shape)
        pos += 8 * n
        out.append(arr.astype(np.uint64))
    if pos != len(payload):
        raise FramingError("trailing bytes after packed arrays")
    return out
