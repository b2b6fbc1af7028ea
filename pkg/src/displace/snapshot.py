"""Versioned binary snapshots of a :class:`~displace.corpus.CitationGraph`.

Layout, all integers little-endian::

    b"DISP"  u8 version
    u64 n_papers  u64 n_edges
    ids          u64[n+1] byte offsets, utf-8 blob
    years        i32[n]
    doc_types    u8[n]
    fields       u64[n+1] offsets, i32[...] labels
    authors      u8[n] presence, u64[n+1] name offsets, u64[k+1] byte offsets, utf-8 blob
    references   u64[n+1] offsets, i32[n_edges] targets
    u64 checksum  (blake2b-64 of every preceding byte)

Citer lists are not stored; they are rebuilt from the reference arrays.
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .corpus import CitationGraph
from .errors import IncompatibleSnapshotError, SnapshotIntegrityError

MAGIC = b"DISP"
FORMAT_VERSION = 1
_CHECKSUM_BYTES = 8


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()


def _strings_block(strings) -> bytes:
    encoded = [s.encode("utf-8") for s in strings]
    offsets = np.zeros(len(encoded) + 1, dtype="<u8")
    np.cumsum([len(e) for e in encoded], out=offsets[1:])
    return offsets.tobytes() + b"".join(encoded)


def snapshot_bytes(graph: CitationGraph) -> bytes:
    n, m = graph.n_papers, graph.n_edges
    parts = [MAGIC, struct.pack("<B", FORMAT_VERSION), struct.pack("<QQ", n, m)]
    parts.append(_strings_block(graph.ids))
    parts.append(graph.years.astype("<i4").tobytes())
    parts.append(graph.doc_type_codes.astype("u1").tobytes())
    parts.append(graph.field_offsets.astype("<u8").tobytes())
    parts.append(graph.field_values.astype("<i4").tobytes())
    authors = graph.author_lists
    parts.append(np.array([a is not None for a in authors], dtype="u1").tobytes())
    counts = np.zeros(n + 1, dtype="<u8")
    np.cumsum([len(a) if a else 0 for a in authors], out=counts[1:])
    parts.append(counts.tobytes())
    parts.append(_strings_block([name for a in authors if a for name in a]))
    parts.append(graph.out_offsets.astype("<u8").tobytes())
    parts.append(graph.out_targets.astype("<i4").tobytes())
    payload = b"".join(parts)
    return payload + _checksum(payload)


def save_snapshot(graph: CitationGraph, path) -> None:
    """Write ``graph`` to ``path`` atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(snapshot_bytes(graph))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: memoryview):
        self.buf = buf
        self.pos = 0

    def take(self, nbytes: int) -> memoryview:
        if nbytes < 0 or self.pos + nbytes > len(self.buf):
            raise SnapshotIntegrityError("snapshot truncated or inconsistent section sizes")
        out = self.buf[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return out

    def array(self, dtype, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * int(count)), dtype=dt)

    def offsets(self, count: int) -> np.ndarray:
        off = self.array("<u8", count + 1)
        if len(off) and (off[0] != 0 or np.any(np.diff(off.astype(np.int64)) < 0)):
            raise SnapshotIntegrityError("non-monotone offset array")
        return off.astype(np.int64)

    def strings(self, count: int) -> list[str]:
        off = self.offsets(count)
        blob = bytes(self.take(int(off[-1]) if len(off) else 0))
        try:
            return [blob[off[i] : off[i + 1]].decode("utf-8") for i in range(count)]
        except UnicodeDecodeError as exc:
            raise SnapshotIntegrityError(f"invalid utf-8 in string block: {exc}") from None


def graph_from_bytes(data: bytes) -> CitationGraph:
    if len(data) < len(MAGIC) + 1 or data[: len(MAGIC)] != MAGIC:
        raise IncompatibleSnapshotError("incompatible snapshot: bad magic bytes")
    version = data[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise IncompatibleSnapshotError(
            f"incompatible snapshot: format version {version}, expected {FORMAT_VERSION}"
        )
    if len(data) < len(MAGIC) + 1 + 16 + _CHECKSUM_BYTES:
        raise SnapshotIntegrityError("snapshot truncated")
    payload, stored = data[:-_CHECKSUM_BYTES], data[-_CHECKSUM_BYTES:]
    if _checksum(payload) != stored:
        raise SnapshotIntegrityError("snapshot checksum mismatch (file truncated or corrupted)")

    r = _Reader(memoryview(payload))
    r.take(len(MAGIC) + 1)
    n, m = struct.unpack("<QQ", r.take(16))
    ids = r.strings(n)
    years = r.array("<i4", n)
    doc_types = r.array("u1", n)
    field_offsets = r.offsets(n)
    field_values = r.array("<i4", field_offsets[-1])
    present = r.array("u1", n)
    counts = r.offsets(n)
    names = r.strings(int(counts[-1]))
    authors = [
        tuple(names[counts[i] : counts[i + 1]]) if present[i] else None for i in range(n)
    ]
    out_offsets = r.offsets(n)
    if out_offsets[-1] != m:
        raise SnapshotIntegrityError("edge count does not match offsets")
    out_targets = r.array("<i4", m)
    if r.pos != len(payload):
        raise SnapshotIntegrityError("trailing bytes before checksum")
    try:
        return CitationGraph(
            ids=ids,
            years=years,
            doc_types=doc_types,
            field_offsets=field_offsets,
            field_values=field_values,
            authors=authors,
            out_offsets=out_offsets,
            out_targets=out_targets,
        )
    except ValueError as exc:
        raise SnapshotIntegrityError(f"inconsistent snapshot contents: {exc}") from None


def load_snapshot(path) -> CitationGraph:
    with open(path, "rb") as fh:
        return graph_from_bytes(fh.read())


def file_checksum(path) -> str:
    """Hex blake2b digest of a file, used in run manifests."""
    h = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
