"""Little-endian block I/O shared by the GLRY, GGPH and GCKP formats.

Every file starts with a 4-byte magic and a ``uint32`` format version. The
body is a flat sequence of typed blocks:

* ``u32`` / ``i64`` / ``f64`` scalars, little-endian
* strings: ``u32`` byte length followed by UTF-8 bytes
* arrays: dtype code (``u8``), ``u8`` ndim, ``ndim`` x ``u64`` dims, raw
  little-endian data in C order

Readers consume blocks in the same order the writer produced them; there is
no random access. See ``docs/formats.md`` for the per-format field order.
"""
from __future__ import annotations

import io
import struct

import numpy as np

_DTYPES = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<i4"),
    4: np.dtype("<i8"),
    5: np.dtype("u1"),
}
_CODES = {dt: code for code, dt in _DTYPES.items()}


class FormatError(ValueError):
    """Raised when a binary file has the wrong magic, version, or layout."""


class BlockWriter:
    def __init__(self, magic: bytes, version: int):
        if len(magic) != 4:
            raise ValueError("magic must be 4 bytes")
        self.buf = io.BytesIO()
        self.buf.write(magic)
        self.u32(version)

    def u32(self, value: int) -> None:
        self.buf.write(struct.pack("<I", value))

    def i64(self, value: int) -> None:
        self.buf.write(struct.pack("<q", value))

    def f64(self, value: float) -> None:
        self.buf.write(struct.pack("<d", value))

    def string(self, value: str) -> None:
        raw = value.encode("utf-8")
        self.u32(len(raw))
        self.buf.write(raw)

    def strings(self, values) -> None:
        values = list(values)
        self.u32(len(values))
        for v in values:
            self.string(v)

    def array(self, arr: np.ndarray) -> None:
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        if dt not in _CODES:
            raise FormatError(f"unsupported dtype {arr.dtype}")
        self.buf.write(struct.pack("<BB", _CODES[dt], arr.ndim))
        for d in arr.shape:
            self.buf.write(struct.pack("<Q", d))
        self.buf.write(np.ascontiguousarray(arr, dtype=dt).tobytes())

    def getvalue(self) -> bytes:
        return self.buf.getvalue()

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.getvalue())


class BlockReader:
    def __init__(self, data: bytes, magic: bytes, supported_versions=(1,)):
        self.data = memoryview(data)
        self.pos = 0
        got = bytes(self._take(4))
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}")
        self.version = self.u32()
        if self.version not in supported_versions:
            raise FormatError(f"unsupported {magic.decode()} version {self.version}")

    @classmethod
    def open(cls, path, magic: bytes, supported_versions=(1,)) -> "BlockReader":
        with open(path, "rb") as fh:
            return cls(fh.read(), magic, supported_versions)

    def _take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise FormatError("truncated file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def string(self) -> str:
        n = self.u32()
        return bytes(self._take(n)).decode("utf-8")

    def strings(self) -> list[str]:
        return [self.string() for _ in range(self.u32())]

    def array(self) -> np.ndarray:
        code, ndim = struct.unpack("<BB", self._take(2))
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code}")
        shape = tuple(struct.unpack("<Q", self._take(8))[0] for _ in range(ndim))
        dt = _DTYPES[code]
        n = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        return np.frombuffer(bytes(self._take(n)), dtype=dt).reshape(shape).copy()

    def at_end(self) -> bool:
        return self.pos == len(self.data)
