"""MAVLink v2 framing: payload codec and frame checksums.

Layout: 0xFD, len, incompat_flags, compat_flags, seq, sysid, compid,
msg_id (24-bit LE), payload, crc16 (MCRF4XX seeded with the message's
crc_extra).  Encoding emits the full-length payload; decoding accepts
trailing-zero truncated payloads by zero extension.  Signing is not
supported: incompat_flags must be 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .dialect import Dialect, MessageSchema, SIGNED_TYPES, crc16_mcrf4xx
from .errors import BadCrc, BadMagic, UnknownMsgId
from .interp import DecodedMessage

MAGIC = 0xFD
HEADER_LEN = 10  # magic..msg_id
CRC_LEN = 2


@dataclass(frozen=True)
class Frame:
    msg_id: int
    payload: bytes
    seq: int = 0
    sysid: int = 1
    compid: int = 1
    incompat_flags: int = 0
    compat_flags: int = 0


def encode_payload(schema: MessageSchema, fields: dict) -> bytes:
    """Wire-ordered little-endian payload, full length (no truncation)."""
    out = bytearray()
    for f in schema.wire_fields:
        raw = fields.get(f.name, 0)
        if f.base_type == "char" and f.array_len:
            data = raw.encode() if isinstance(raw, str) else bytes(raw)
            out += data[:f.array_len].ljust(f.array_len, b"\x00")
        elif f.array_len:
            vals = raw if isinstance(raw, (list, tuple)) else [raw] * 0
            vals = list(vals)[:f.array_len] + [0] * max(0, f.array_len - len(vals))
            for v in vals:
                out += _encode_scalar(f.base_type, v)
        else:
            out += _encode_scalar(f.base_type, raw)
    return bytes(out)


def _encode_scalar(base_type: str, value) -> bytes:
    if base_type == "float":
        return struct.pack("<f", float(value))
    if base_type == "double":
        return struct.pack("<d", float(value))
    if base_type == "char":
        return bytes([int(value) & 0xFF])
    size = {"u8": 1, "i8": 1, "u16": 2, "i16": 2, "u32": 4, "i32": 4, "u64": 8, "i64": 8}[base_type]
    v = int(value) & ((1 << (8 * size)) - 1)
    return v.to_bytes(size, "little")


def decode_payload(schema: MessageSchema, payload: bytes) -> dict:
    """Field valuation from possibly-truncated payload bytes (zero-extended)."""
    buf = payload.ljust(schema.wire_size, b"\x00")
    fields: dict = {}
    off = 0
    for f in schema.wire_fields:
        if f.base_type == "char" and f.array_len:
            fields[f.name] = buf[off:off + f.array_len].rstrip(b"\x00").decode(errors="replace")
        elif f.array_len:
            fields[f.name] = [
                _decode_scalar(f.base_type, buf, off + i * f.unit_size)
                for i in range(f.array_len)
            ]
        else:
            fields[f.name] = _decode_scalar(f.base_type, buf, off)
        off += f.wire_size
    return fields


def _decode_scalar(base_type: str, buf: bytes, off: int):
    if base_type == "float":
        return struct.unpack_from("<f", buf, off)[0]
    if base_type == "double":
        return struct.unpack_from("<d", buf, off)[0]
    size = {"u8": 1, "i8": 1, "u16": 2, "i16": 2, "u32": 4, "i32": 4,
            "u64": 8, "i64": 8, "char": 1}[base_type]
    u = int.from_bytes(buf[off:off + size], "little")
    if base_type in SIGNED_TYPES and u >= 1 << (8 * size - 1):
        u -= 1 << (8 * size)
    return u


def frame_crc(body: bytes, crc_extra: int) -> int:
    """Checksum over len..payload plus the per-message seed byte."""
    return crc16_mcrf4xx(bytes([crc_extra]), crc16_mcrf4xx(body))


def encode_frame(schema: MessageSchema, fields: dict, seq: int = 0,
                 sysid: int = 1, compid: int = 1, truncate: bool = False) -> bytes:
    payload = encode_payload(schema, fields)
    if truncate:
        stripped = payload.rstrip(b"\x00")
        payload = stripped if stripped else payload[:1]
    header = bytes([
        MAGIC, len(payload), 0, 0, seq & 0xFF, sysid & 0xFF, compid & 0xFF,
        schema.msg_id & 0xFF, (schema.msg_id >> 8) & 0xFF, (schema.msg_id >> 16) & 0xFF,
    ])
    crc = frame_crc(header[1:] + payload, schema.crc_extra)
    return header + payload + crc.to_bytes(2, "little")


def decode_frame(data: bytes, dialect: Dialect) -> tuple[Frame, DecodedMessage]:
    """Parse and checksum one frame; raises BadMagic / UnknownMsgId / BadCrc."""
    if len(data) < HEADER_LEN + CRC_LEN or data[0] != MAGIC:
        raise BadMagic(f"not a v2 frame (len={len(data)})")
    plen = data[1]
    if len(data) != HEADER_LEN + plen + CRC_LEN:
        raise BadMagic(f"length mismatch: header says {plen}, frame has {len(data) - HEADER_LEN - CRC_LEN}")
    if data[2] != 0:
        raise BadMagic(f"unsupported incompat_flags {data[2]:#x} (signing not supported)")
    msg_id = data[7] | (data[8] << 8) | (data[9] << 16)
    payload = data[HEADER_LEN:HEADER_LEN + plen]
    schema = dialect.by_id.get(msg_id)
    if schema is None:
        raise UnknownMsgId(msg_id)
    got = int.from_bytes(data[-2:], "little")
    want = frame_crc(data[1:-2], schema.crc_extra)
    if got != want:
        raise BadCrc(f"crc {got:#06x} != {want:#06x} for {schema.label}")
    frame = Frame(msg_id=msg_id, payload=payload, seq=data[4], sysid=data[5],
                  compid=data[6], incompat_flags=data[2], compat_flags=data[3])
    return frame, DecodedMessage(msg_id, decode_payload(schema, payload))
