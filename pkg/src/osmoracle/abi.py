"""EVM ABI encoding of oracle responses.

Payloads are function return data: no selector, 32-byte words, int64 values
sign-extended to a full word. The six layouts correspond to the Solidity
return types

=============== ==============================
Int64Scalar     ``int64``
Int64Array      ``int64[]``
StringArray     ``string[]``
CoordPairList   ``(int64,int64)[]``
GeocodeTuple    ``(int64,int64,int64,int64)``
ReverseTuple    ``int64, int64, string``
=============== ==============================
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

from .errors import IdOverflow, MalformedPayload
from .geocoder import GeocodeResult, ReverseGeocodeResult
from .model import INT64_MAX, INT64_MIN, ObjectType, ScaledCoord

WORD = 32


class Layout(Enum):
    INT64_SCALAR = "Int64Scalar"
    INT64_ARRAY = "Int64Array"
    STRING_ARRAY = "StringArray"
    COORD_PAIR_LIST = "CoordPairList"
    GEOCODE_TUPLE = "GeocodeTuple"
    REVERSE_TUPLE = "ReverseTuple"


@dataclass(frozen=True)
class AbiPayload:
    data: bytes
    layout: Layout

    def __post_init__(self) -> None:
        if len(self.data) % WORD:
            raise MalformedPayload(f"payload length {len(self.data)} is not a multiple of {WORD}")

    def hex(self) -> str:
        return "0x" + self.data.hex()

    @classmethod
    def from_hex(cls, text: str, layout: Layout) -> AbiPayload:
        body = text[2:] if text.startswith(("0x", "0X")) else text
        try:
            return cls(bytes.fromhex(body), layout)
        except ValueError as exc:
            raise MalformedPayload(f"bad hex: {exc}") from None


def _int_word(v: int) -> bytes:
    if isinstance(v, bool) or not INT64_MIN <= v <= INT64_MAX:
        raise OverflowError(f"{v!r} does not fit in int64")
    return v.to_bytes(WORD, "big", signed=True)


def _uint_word(v: int) -> bytes:
    return v.to_bytes(WORD, "big")


def _padded(raw: bytes) -> bytes:
    return raw + b"\x00" * (-len(raw) % WORD)


def _check_id(oid: int) -> int:
    if oid > INT64_MAX:
        raise IdOverflow(f"object id {oid} exceeds the int64 range of the wire format")
    return oid


def encode_int64(v: int) -> AbiPayload:
    return AbiPayload(_int_word(v), Layout.INT64_SCALAR)


def encode_int64_array(vs: Sequence[int]) -> AbiPayload:
    body = b"".join(_int_word(v) for v in vs)
    return AbiPayload(_uint_word(WORD) + _uint_word(len(vs)) + body, Layout.INT64_ARRAY)


def encode_id_array(ids: Sequence[int]) -> AbiPayload:
    """An ``int64[]`` of object ids, rejecting ids above the int64 range."""
    return encode_int64_array([_check_id(i) for i in ids])


def _string_array_body(ss: Sequence[str]) -> bytes:
    blobs = []
    for s in ss:
        raw = s.encode("utf-8")
        blobs.append(_uint_word(len(raw)) + _padded(raw))
    heads, offset = [], WORD * len(blobs)
    for blob in blobs:
        heads.append(_uint_word(offset))
        offset += len(blob)
    return _uint_word(len(ss)) + b"".join(heads) + b"".join(blobs)


def encode_string_array(ss: Sequence[str]) -> AbiPayload:
    return AbiPayload(_uint_word(WORD) + _string_array_body(ss), Layout.STRING_ARRAY)


def encode_coord_pairs(cs: Sequence[ScaledCoord]) -> AbiPayload:
    body = b"".join(_int_word(lat) + _int_word(lon) for lat, lon in cs)
    return AbiPayload(_uint_word(WORD) + _uint_word(len(cs)) + body, Layout.COORD_PAIR_LIST)


def encode_geocode(r: GeocodeResult) -> AbiPayload:
    words = (int(r.type_flag), _check_id(r.id), r.coord.lat, r.coord.lon)
    return AbiPayload(b"".join(_int_word(w) for w in words), Layout.GEOCODE_TUPLE)


def encode_reverse(r: ReverseGeocodeResult) -> AbiPayload:
    if not r.description:
        raise ValueError("reverse geocode description must be non-empty")
    raw = r.description.encode("utf-8")
    data = (
        _int_word(int(r.type_flag))
        + _int_word(_check_id(r.id))
        + _uint_word(3 * WORD)
        + _uint_word(len(raw))
        + _padded(raw)
    )
    return AbiPayload(data, Layout.REVERSE_TUPLE)


# -- decoding --


class _Reader:
    def __init__(self, data: bytes) -> None:
        if len(data) % WORD:
            raise MalformedPayload(f"payload length {len(data)} is not a multiple of {WORD}")
        self.data = data

    def word(self, pos: int) -> bytes:
        if pos < 0 or pos + WORD > len(self.data):
            raise MalformedPayload(f"read of word at {pos} runs past end ({len(self.data)} bytes)")
        return self.data[pos : pos + WORD]

    def int64(self, pos: int) -> int:
        v = int.from_bytes(self.word(pos), "big", signed=True)
        if not INT64_MIN <= v <= INT64_MAX:
            raise MalformedPayload(f"word at {pos} is not a sign-extended int64")
        return v

    def uint(self, pos: int) -> int:
        return int.from_bytes(self.word(pos), "big")

    def offset(self, pos: int, base: int = 0) -> int:
        off = self.uint(pos)
        if off % WORD or base + off > len(self.data):
            raise MalformedPayload(f"offset {off} at {pos} is misaligned or past end")
        return base + off

    def length(self, pos: int, item_size: int) -> int:
        n = self.uint(pos)
        if n * item_size > len(self.data) - pos - WORD:
            raise MalformedPayload(f"length {n} at {pos} runs past end")
        return n

    def string(self, pos: int) -> str:
        n = self.uint(pos)
        start = pos + WORD
        end = start + n
        if end > len(self.data):
            raise MalformedPayload(f"string at {pos} runs past end")
        pad_end = start + n + (-n % WORD)
        if pad_end > len(self.data) or any(self.data[end:pad_end]):
            raise MalformedPayload(f"string at {pos} has bad padding")
        try:
            return self.data[start:end].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayload(f"string at {pos} is not UTF-8: {exc}") from None

    def end(self, used: int) -> None:
        if used != len(self.data):
            raise MalformedPayload(f"{len(self.data) - used} trailing bytes")


def decode(p: AbiPayload | bytes, layout: Layout | None = None):
    """Invert the encoder for ``layout`` (defaults to ``p.layout``).

    Returns an int, a list of ints, a list of strings, a list of
    :class:`ScaledCoord`, a :class:`GeocodeResult` or a
    :class:`ReverseGeocodeResult`. Payloads that no encoder here could have
    produced raise :class:`MalformedPayload`.
    """
    if isinstance(p, AbiPayload):
        data, layout = p.data, layout or p.layout
    else:
        data = bytes(p)
    if layout is None:
        raise ValueError("layout is required when decoding raw bytes")
    r = _Reader(data)

    if layout is Layout.INT64_SCALAR:
        r.end(WORD)
        return r.int64(0)

    if layout is Layout.INT64_ARRAY or layout is Layout.COORD_PAIR_LIST:
        start = r.offset(0)
        if start != WORD:
            raise MalformedPayload(f"array offset {start}, expected {WORD}")
        width = 1 if layout is Layout.INT64_ARRAY else 2
        n = r.length(start, width * WORD)
        first = start + WORD
        values = [r.int64(first + i * WORD) for i in range(n * width)]
        r.end(first + n * width * WORD)
        if width == 1:
            return values
        return [ScaledCoord(values[i], values[i + 1]) for i in range(0, len(values), 2)]

    if layout is Layout.STRING_ARRAY:
        start = r.offset(0)
        if start != WORD:
            raise MalformedPayload(f"array offset {start}, expected {WORD}")
        n = r.length(start, WORD)
        base = start + WORD
        out, expected = [], base + n * WORD
        for i in range(n):
            pos = r.offset(base + i * WORD, base)
            if pos != expected:
                raise MalformedPayload(f"string {i} at {pos}, expected {expected}")
            s = r.string(pos)
            out.append(s)
            expected = pos + WORD + len(_padded(s.encode("utf-8")))
        r.end(expected)
        return out

    if layout is Layout.GEOCODE_TUPLE:
        r.end(4 * WORD)
        flag, oid, lat, lon = (r.int64(i * WORD) for i in range(4))
        return GeocodeResult(_flag(flag), _positive(oid), ScaledCoord(lat, lon))

    if layout is Layout.REVERSE_TUPLE:
        flag, oid = r.int64(0), r.int64(WORD)
        pos = r.offset(2 * WORD)
        if pos != 3 * WORD:
            raise MalformedPayload(f"string offset {pos}, expected {3 * WORD}")
        s = r.string(pos)
        r.end(pos + WORD + len(_padded(s.encode("utf-8"))))
        if not s:
            raise MalformedPayload("empty description")
        return ReverseGeocodeResult(_flag(flag), _positive(oid), s)

    raise ValueError(f"unknown layout {layout!r}")


def _flag(v: int) -> ObjectType:
    try:
        return ObjectType(v)
    except ValueError:
        raise MalformedPayload(f"object type flag {v} is not 0 or 1") from None


def _positive(v: int) -> int:
    if v <= 0:
        raise MalformedPayload(f"object id {v} is not positive")
    return v
