"""MAVLink dialect XML ingestion.

Reads the `<messages>`/`<enums>` subset of a MAVLink v2 dialect, computes
the wire field order (storage size descending, stable; extensions appended
in declaration order) and the per-message CRC seed byte, and retains enum
tables for constant resolution.  `<include>` is resolved one level deep,
relative to the dialect file.  Signing, deprecated, and wip markers are
ignored.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateMessageId, UnknownFieldType, XmlMalformed

# normalized base type -> (storage bytes, C name)
BASE_TYPES = {
    "u8": (1, "uint8_t"),
    "u16": (2, "uint16_t"),
    "u32": (4, "uint32_t"),
    "u64": (8, "uint64_t"),
    "i8": (1, "int8_t"),
    "i16": (2, "int16_t"),
    "i32": (4, "int32_t"),
    "i64": (8, "int64_t"),
    "float": (4, "float"),
    "double": (8, "double"),
    "char": (1, "char"),
}

_XML_TYPES = {
    "uint8_t": "u8",
    "uint8_t_mavlink_version": "u8",
    "uint16_t": "u16",
    "uint32_t": "u32",
    "uint64_t": "u64",
    "int8_t": "i8",
    "int16_t": "i16",
    "int32_t": "i32",
    "int64_t": "i64",
    "float": "float",
    "double": "double",
    "char": "char",
}

SIGNED_TYPES = {"i8", "i16", "i32", "i64"}


@dataclass(frozen=True)
class MessageField:
    name: str
    base_type: str  # normalized key of BASE_TYPES
    array_len: int = 0  # 0 = scalar; char[N] and type[N] carry N >= 1
    enum_ref: str | None = None
    is_extension: bool = False
    xml_type: str = ""  # original type token, brackets stripped (CRC input)

    @property
    def unit_size(self) -> int:
        return BASE_TYPES[self.base_type][0]

    @property
    def wire_size(self) -> int:
        return self.unit_size * (self.array_len or 1)

    @property
    def c_type(self) -> str:
        return BASE_TYPES[self.base_type][1]


@dataclass(frozen=True)
class MessageSchema:
    msg_id: int
    label: str
    xml_fields: tuple[MessageField, ...]  # declaration order
    wire_fields: tuple[MessageField, ...] = ()
    crc_extra: int = 0

    def field_by_name(self, name: str) -> MessageField | None:
        for f in self.xml_fields:
            if f.name == name:
                return f
        return None

    @property
    def wire_size(self) -> int:
        return sum(f.wire_size for f in self.wire_fields)

    def wire_offset(self, name: str) -> int:
        off = 0
        for f in self.wire_fields:
            if f.name == name:
                return off
            off += f.wire_size
        raise KeyError(name)


def wire_order(fields: tuple[MessageField, ...]) -> tuple[MessageField, ...]:
    """Serialization order: non-extension fields stably sorted by unit size
    descending, then extension fields in declaration order."""
    base = [f for f in fields if not f.is_extension]
    ext = [f for f in fields if f.is_extension]
    base.sort(key=lambda f: -f.unit_size)  # list.sort is stable
    return tuple(base + ext)


def crc16_mcrf4xx(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/MCRF4XX (the X.25 variant MAVLink frames use)."""
    for byte in data:
        tmp = byte ^ (crc & 0xFF)
        tmp = (tmp ^ (tmp << 4)) & 0xFF
        crc = ((crc >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4)) & 0xFFFF
    return crc


def compute_crc_extra(label: str, wire_fields: tuple[MessageField, ...]) -> int:
    """Per-message frame-checksum seed: name + wire-ordered non-extension
    fields (type token, name, array-length byte), halves xored."""
    crc = crc16_mcrf4xx((label + " ").encode())
    for f in wire_fields:
        if f.is_extension:
            continue
        crc = crc16_mcrf4xx((f.xml_type + " ").encode(), crc)
        crc = crc16_mcrf4xx((f.name + " ").encode(), crc)
        if f.array_len:
            crc = crc16_mcrf4xx(bytes([f.array_len]), crc)
    return (crc & 0xFF) ^ (crc >> 8)


@dataclass
class Dialect:
    """A parsed dialect: message schemas plus enum tables."""

    by_label: dict[str, MessageSchema] = field(default_factory=dict)
    by_id: dict[int, MessageSchema] = field(default_factory=dict)
    enums: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def messages(self) -> list[MessageSchema]:
        return sorted(self.by_id.values(), key=lambda m: m.msg_id)

    def enum_value(self, entry: str) -> int | None:
        for table in self.enums.values():
            if entry in table:
                return table[entry]
        return None

    def schema(self, label: str) -> MessageSchema | None:
        return self.by_label.get(label)


def _parse_field(el: ET.Element, is_extension: bool) -> MessageField:
    raw = (el.get("type") or "").strip()
    name = (el.get("name") or "").strip()
    if not raw or not name:
        raise XmlMalformed(f"field missing type or name: {ET.tostring(el, encoding='unicode').strip()}")
    array_len = 0
    base = raw
    if "[" in raw:
        base, _, rest = raw.partition("[")
        try:
            array_len = int(rest.rstrip("]"))
        except ValueError as exc:
            raise UnknownFieldType(raw) from exc
        if array_len < 1:
            raise UnknownFieldType(raw)
    if base not in _XML_TYPES:
        raise UnknownFieldType(raw)
    return MessageField(
        name=name,
        base_type=_XML_TYPES[base],
        array_len=array_len,
        enum_ref=el.get("enum"),
        is_extension=is_extension,
        xml_type="uint8_t" if base == "uint8_t_mavlink_version" else base,
    )


def _parse_message(el: ET.Element) -> MessageSchema:
    try:
        msg_id = int(el.get("id", ""), 0)
    except ValueError as exc:
        raise XmlMalformed(f"bad message id {el.get('id')!r}") from exc
    label = (el.get("name") or "").strip()
    if not label:
        raise XmlMalformed(f"message {msg_id} has no name")
    fields: list[MessageField] = []
    seen: set[str] = set()
    in_extensions = False
    for child in el:
        if child.tag == "extensions":
            in_extensions = True
        elif child.tag == "field":
            f = _parse_field(child, in_extensions)
            if f.name in seen:
                raise XmlMalformed(f"duplicate field '{f.name}' in {label}")
            seen.add(f.name)
            fields.append(f)
    xml_fields = tuple(fields)
    wire = wire_order(xml_fields)
    return MessageSchema(
        msg_id=msg_id,
        label=label,
        xml_fields=xml_fields,
        wire_fields=wire,
        crc_extra=compute_crc_extra(label, wire),
    )


def parse_dialect(xml: bytes, base_dir: Path | None = None,
                  _follow_includes: bool = True) -> Dialect:
    """Parse one dialect document; includes are followed one level when
    `base_dir` is given."""
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise XmlMalformed(str(exc)) from exc
    dialect = Dialect()

    if base_dir is not None and _follow_includes:
        for inc in root.iter("include"):
            inc_path = base_dir / (inc.text or "").strip()
            try:
                data = inc_path.read_bytes()
            except OSError as exc:
                raise XmlMalformed(f"cannot read include {inc_path}") from exc
            _merge(dialect, parse_dialect(data, base_dir, _follow_includes=False))

    for enum_el in root.iter("enum"):
        name = (enum_el.get("name") or "").strip()
        table = dialect.enums.setdefault(name, {})
        for entry in enum_el.iter("entry"):
            entry_name = (entry.get("name") or "").strip()
            try:
                table[entry_name] = int(entry.get("value", ""), 0)
            except ValueError as exc:
                raise XmlMalformed(f"bad enum value for {entry_name}") from exc

    for msg_el in root.iter("message"):
        schema = _parse_message(msg_el)
        if schema.msg_id in dialect.by_id:
            raise DuplicateMessageId(f"message id {schema.msg_id} defined twice")
        dialect.by_id[schema.msg_id] = schema
        dialect.by_label[schema.label] = schema

    return dialect


def _merge(into: Dialect, other: Dialect) -> None:
    for schema in other.by_id.values():
        if schema.msg_id in into.by_id:
            raise DuplicateMessageId(f"message id {schema.msg_id} defined twice across includes")
        into.by_id[schema.msg_id] = schema
        into.by_label[schema.label] = schema
    for name, table in other.enums.items():
        into.enums.setdefault(name, {}).update(table)


def load_dialect(path: str | Path) -> Dialect:
    path = Path(path)
    return parse_dialect(path.read_bytes(), base_dir=path.parent)
