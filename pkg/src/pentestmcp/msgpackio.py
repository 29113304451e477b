"""Minimal MessagePack codec for the Metasploit RPC wire.

Covers the types the daemon traffic uses: nil, booleans, integers,
float64, UTF-8 strings, binary, arrays, and maps. Encoding always picks
the smallest representation; str payloads that fail strict UTF-8 decode
come back as bytes, matching how the daemon ships raw session output.
"""

from __future__ import annotations

import struct
from typing import Any


class MsgpackError(ValueError):
    """Unencodable value or malformed packed data."""


def packb(obj: Any) -> bytes:
    buf = bytearray()
    _pack(obj, buf)
    return bytes(buf)


def _pack(obj: Any, buf: bytearray) -> None:
    if obj is None:
        buf.append(0xC0)
    elif obj is True:
        buf.append(0xC3)
    elif obj is False:
        buf.append(0xC2)
    elif isinstance(obj, int):
        _pack_int(obj, buf)
    elif isinstance(obj, float):
        buf.append(0xCB)
        buf += struct.pack(">d", obj)
    elif isinstance(obj, str):
        data = obj.encode("utf-8")
        n = len(data)
        if n <= 0x1F:
            buf.append(0xA0 | n)
        elif n <= 0xFF:
            buf += struct.pack(">BB", 0xD9, n)
        elif n <= 0xFFFF:
            buf += struct.pack(">BH", 0xDA, n)
        elif n <= 0xFFFFFFFF:
            buf += struct.pack(">BI", 0xDB, n)
        else:
            raise MsgpackError("string too long")
        buf += data
    elif isinstance(obj, (bytes, bytearray, memoryview)):
        data = bytes(obj)
        n = len(data)
        if n <= 0xFF:
            buf += struct.pack(">BB", 0xC4, n)
        elif n <= 0xFFFF:
            buf += struct.pack(">BH", 0xC5, n)
        elif n <= 0xFFFFFFFF:
            buf += struct.pack(">BI", 0xC6, n)
        else:
            raise MsgpackError("binary too long")
        buf += data
    elif isinstance(obj, (list, tuple)):
        n = len(obj)
        if n <= 0x0F:
            buf.append(0x90 | n)
        elif n <= 0xFFFF:
            buf += struct.pack(">BH", 0xDC, n)
        elif n <= 0xFFFFFFFF:
            buf += struct.pack(">BI", 0xDD, n)
        else:
            raise MsgpackError("array too long")
        for item in obj:
            _pack(item, buf)
    elif isinstance(obj, dict):
        n = len(obj)
        if n <= 0x0F:
            buf.append(0x80 | n)
        elif n <= 0xFFFF:
            buf += struct.pack(">BH", 0xDE, n)
        elif n <= 0xFFFFFFFF:
            buf += struct.pack(">BI", 0xDF, n)
        else:
            raise MsgpackError("map too long")
        for key, value in obj.items():
            _pack(key, buf)
            _pack(value, buf)
    else:
        raise MsgpackError(f"cannot pack {type(obj).__name__}")


def _pack_int(value: int, buf: bytearray) -> None:
    if 0 <= value <= 0x7F:
        buf.append(value)
    elif -32 <= value < 0:
        buf.append(value & 0xFF)
    elif 0 < value:
        if value <= 0xFF:
            buf += struct.pack(">BB", 0xCC, value)
        elif value <= 0xFFFF:
            buf += struct.pack(">BH", 0xCD, value)
        elif value <= 0xFFFFFFFF:
            buf += struct.pack(">BI", 0xCE, value)
        elif value <= 0xFFFFFFFFFFFFFFFF:
            buf += struct.pack(">BQ", 0xCF, value)
        else:
            raise MsgpackError("integer out of 64-bit range")
    else:
        if value >= -0x80:
            buf += struct.pack(">Bb", 0xD0, value)
        elif value >= -0x8000:
            buf += struct.pack(">Bh", 0xD1, value)
        elif value >= -0x80000000:
            buf += struct.pack(">Bi", 0xD2, value)
        elif value >= -0x8000000000000000:
            buf += struct.pack(">Bq", 0xD3, value)
        else:
            raise MsgpackError("integer out of 64-bit range")


def unpackb(data: bytes) -> Any:
    """Decode one complete object; trailing bytes are an error."""
    decoder = _Decoder(data)
    obj = decoder.decode()
    if decoder.pos != len(data):
        raise MsgpackError(f"trailing bytes at offset {decoder.pos}")
    return obj


class _Decoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise MsgpackError(f"truncated input at offset {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def _unpack(self, fmt: str) -> int | float:
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self._take(size))[0]

    def decode(self) -> Any:
        tag = self._take(1)[0]
        if tag <= 0x7F:
            return tag
        if tag >= 0xE0:
            return tag - 0x100
        if 0x80 <= tag <= 0x8F:
            return self._decode_map(tag & 0x0F)
        if 0x90 <= tag <= 0x9F:
            return self._decode_array(tag & 0x0F)
        if 0xA0 <= tag <= 0xBF:
            return self._decode_str(tag & 0x1F)
        handler = _TAGS.get(tag)
        if handler is None:
            raise MsgpackError(f"unsupported type tag 0x{tag:02x} at offset {self.pos - 1}")
        return handler(self)

    def _decode_str(self, n: int) -> str | bytes:
        raw = self._take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            return raw

    def _decode_array(self, n: int) -> list:
        return [self.decode() for _ in range(n)]

    def _decode_map(self, n: int) -> dict:
        out = {}
        for _ in range(n):
            key = self.decode()
            if isinstance(key, (dict, list)):
                raise MsgpackError("unhashable map key")
            out[key] = self.decode()
        return out


_TAGS = {
    0xC0: lambda d: None,
    0xC2: lambda d: False,
    0xC3: lambda d: True,
    0xC4: lambda d: bytes(d._take(d._unpack(">B"))),
    0xC5: lambda d: bytes(d._take(d._unpack(">H"))),
    0xC6: lambda d: bytes(d._take(d._unpack(">I"))),
    0xCA: lambda d: d._unpack(">f"),
    0xCB: lambda d: d._unpack(">d"),
    0xCC: lambda d: d._unpack(">B"),
    0xCD: lambda d: d._unpack(">H"),
    0xCE: lambda d: d._unpack(">I"),
    0xCF: lambda d: d._unpack(">Q"),
    0xD0: lambda d: d._unpack(">b"),
    0xD1: lambda d: d._unpack(">h"),
    0xD2: lambda d: d._unpack(">i"),
    0xD3: lambda d: d._unpack(">q"),
    0xD9: lambda d: d._decode_str(d._unpack(">B")),
    0xDA: lambda d: d._decode_str(d._unpack(">H")),
    0xDB: lambda d: d._decode_str(d._unpack(">I")),
    0xDC: lambda d: d._decode_array(d._unpack(">H")),
    0xDD: lambda d: d._decode_array(d._unpack(">I")),
    0xDE: lambda d: d._decode_map(d._unpack(">H")),
    0xDF: lambda d: d._decode_map(d._unpack(">I")),
}
