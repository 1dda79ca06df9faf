"""
SBC1 store — out-of-core, fixed-stride columnar file of BD[s] blocks.

Provides:
  - StoreHeader                 → the 31-byte file header
  - encode_block / decode_block → SourceData ⇄ bytes
  - create_store(...)           → write a header and a stream of blocks
  - BdStore                     → random access, distance-only reads, in-place
                                  rewrites, staged commit/rollback, growth

Layout (little-endian):

    header  '<4sHQQQB'  magic "SBC1", version, n, lo, hi, sigma_width
    block s at header_size + (s − lo) · n · (9 + sigma_width):
        d      n × u8       (0xFF = unreachable)
        σ      n × u{8·sigma_width}
        δ      n × f64

Vertex ids are positional; nothing but the three columns is stored.
See docs/sbc1-format.md for the full description.
"""

import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from brandes import DIST_DTYPE, UNREACHABLE, SourceData
from config import MAX_STORED_DISTANCE, SIGMA_WIDTHS
from errors import DistanceOverflowError, SigmaOverflowError, StoreFormatError

log = logging.getLogger("bd-store")

MAGIC = b"SBC1"
VERSION = 1
HEADER = struct.Struct("<4sHQQQB")
HEADER_SIZE = HEADER.size          # 31
UNREACHABLE_BYTE = 0xFF

_SIGMA_DTYPES = {2: np.dtype("<u2"), 4: np.dtype("<u4"), 8: np.dtype("<u8")}
_DELTA_DTYPE = np.dtype("<f8")


# ─── Header ──────────────────────────────────────────────────

@dataclass(frozen=True)
class StoreHeader:
    n: int
    lo: int
    hi: int
    sigma_width: int
    version: int = VERSION

    def __post_init__(self):
        if self.sigma_width not in SIGMA_WIDTHS:
            raise StoreFormatError(f"sigma_width must be one of {SIGMA_WIDTHS}, got {self.sigma_width}")
        if not 0 <= self.lo < self.hi <= self.n:
            raise StoreFormatError(f"invalid source range [{self.lo}, {self.hi}) for n={self.n}")

    @property
    def block_size(self) -> int:
        return self.n * (9 + self.sigma_width)

    @property
    def file_size(self) -> int:
        return HEADER_SIZE + (self.hi - self.lo) * self.block_size

    def offset(self, s: int) -> int:
        return HEADER_SIZE + (s - self.lo) * self.block_size

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.n, self.lo, self.hi, self.sigma_width)

    @classmethod
    def unpack(cls, raw: bytes) -> "StoreHeader":
        if len(raw) < HEADER_SIZE:
            raise StoreFormatError(f"truncated header ({len(raw)} of {HEADER_SIZE} bytes)")
        magic, version, n, lo, hi, width = HEADER.unpack(raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise StoreFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise StoreFormatError(f"unsupported SBC1 version {version}")
        return cls(n=n, lo=lo, hi=hi, sigma_width=width, version=version)


# ─── Block codec ─────────────────────────────────────────────

def encode_block(s: int, data: SourceData, sigma_width: int) -> bytes:
    """Serialize one BD[s]. Raises instead of truncating a distance or a path count."""
    d = data.d
    unreachable = d == UNREACHABLE
    too_far = (~unreachable) & (d > MAX_STORED_DISTANCE)
    if too_far.any():
        v = int(np.argmax(too_far))
        raise DistanceOverflowError(s, v, int(d[v]))
    limit = (1 << (8 * sigma_width)) - 1
    if sigma_width < 8 and len(data.sigma) and int(data.sigma.max()) > limit:
        v = int(np.argmax(data.sigma > limit))
        raise SigmaOverflowError(s, v, int(data.sigma[v]), sigma_width)

    d_col = np.where(unreachable, UNREACHABLE_BYTE, d).astype(np.uint8)
    sigma_col = data.sigma.astype(_SIGMA_DTYPES[sigma_width])
    delta_col = data.delta.astype(_DELTA_DTYPE)
    return d_col.tobytes() + sigma_col.tobytes() + delta_col.tobytes()


def decode_distances(raw: bytes) -> np.ndarray:
    d = np.frombuffer(raw, dtype=np.uint8).astype(DIST_DTYPE)
    d[d == UNREACHABLE_BYTE] = UNREACHABLE
    return d


def decode_block(raw: bytes, n: int, sigma_width: int, d: Optional[np.ndarray] = None) -> SourceData:
    """Inverse of encode_block. A distance column that was already read can be passed in."""
    sigma_end = n + n * sigma_width
    if d is None:
        d = decode_distances(raw[:n])
    sigma = np.frombuffer(raw[n:sigma_end], dtype=_SIGMA_DTYPES[sigma_width]).astype(np.uint64)
    delta = np.frombuffer(raw[sigma_end:], dtype=_DELTA_DTYPE).astype(np.float64)
    return SourceData(d=d, sigma=sigma, delta=delta)


# ─── Store ───────────────────────────────────────────────────

class BdStore:
    """
    One SBC1 file covering sources [lo, hi).

    Reads and writes go through a single r+b handle. Staged blocks wait in
    a temporary file (directory from SBC_STAGING_DIR, else next to the
    store) until commit() copies them into place.
    """

    def __init__(self, path: Path, header: StoreHeader, staging_dir: Optional[Path] = None):
        self.path = Path(path)
        self.header = header
        self.staging_dir = Path(staging_dir) if staging_dir else self.path.parent
        self._f = open(self.path, "r+b")
        self._staged: dict[int, int] = {}          # source → offset in staging file
        self._staging_file = None
        self.bytes_read = 0
        self.bytes_written = 0
        self.block_writes = 0

    # ─── Open / close ────────────────────────────────────────

    @classmethod
    def open(cls, path: str | Path, staging_dir: Optional[Path] = None) -> "BdStore":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Store not found: {path}")
        with open(path, "rb") as f:
            header = StoreHeader.unpack(f.read(HEADER_SIZE))
        actual = path.stat().st_size
        if actual != header.file_size:
            raise StoreFormatError(
                f"{path.name}: size {actual} does not match header ({header.file_size} bytes expected)"
            )
        return cls(path, header, staging_dir)

    def close(self) -> None:
        self._discard_staging()
        if not self._f.closed:
            self._f.close()

    def __enter__(self) -> "BdStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __getstate__(self):
        raise TypeError("BdStore holds an open file; pass its path to other processes instead")

    # ─── Accessors ───────────────────────────────────────────

    @property
    def n(self) -> int:
        return self.header.n

    @property
    def lo(self) -> int:
        return self.header.lo

    @property
    def hi(self) -> int:
        return self.header.hi

    @property
    def sigma_width(self) -> int:
        return self.header.sigma_width

    def _check_source(self, s: int) -> None:
        if not self.lo <= s < self.hi:
            raise IndexError(f"source {s} outside store range [{self.lo}, {self.hi})")

    def _read(self, offset: int, size: int) -> bytes:
        self._f.seek(offset)
        raw = self._f.read(size)
        if len(raw) != size:
            raise StoreFormatError(f"{self.path.name}: truncated read at offset {offset}")
        self.bytes_read += size
        return raw

    def reset_counters(self) -> None:
        self.bytes_read = 0
        self.bytes_written = 0
        self.block_writes = 0

    # ─── Reads ───────────────────────────────────────────────

    def read_distances_only(self, s: int) -> np.ndarray:
        """Only the n-byte distance column of BD[s]."""
        self._check_source(s)
        return decode_distances(self._read(self.header.offset(s), self.n))

    def load_source(self, s: int, d: Optional[np.ndarray] = None) -> SourceData:
        """
        Decode BD[s]. When d (from read_distances_only) is given, only the σ
        and δ columns are read.
        """
        self._check_source(s)
        offset = self.header.offset(s)
        n = self.n
        if d is None:
            return decode_block(self._read(offset, self.header.block_size), n, self.sigma_width)
        rest = self._read(offset + n, self.header.block_size - n)
        return decode_block(b"\0" * n + rest, n, self.sigma_width, d=d)

    # ─── Writes ──────────────────────────────────────────────

    def write_source_in_place(self, s: int, data: SourceData) -> None:
        """Rewrite exactly one block; every other byte of the file is left alone."""
        self._check_source(s)
        self._write_block(s, encode_block(s, data, self.sigma_width))

    def _write_block(self, s: int, raw: bytes) -> None:
        if len(raw) != self.header.block_size:
            raise StoreFormatError(f"block for source {s} has {len(raw)} bytes, expected {self.header.block_size}")
        self._f.seek(self.header.offset(s))
        self._f.write(raw)
        self.bytes_written += len(raw)
        self.block_writes += 1

    # ─── Staging ─────────────────────────────────────────────

    def stage_source(self, s: int, data: SourceData) -> None:
        """Encode BD[s] into the staging file; the store itself is untouched until commit()."""
        self._check_source(s)
        raw = encode_block(s, data, self.sigma_width)
        if self._staging_file is None:
            self.staging_dir.mkdir(parents=True, exist_ok=True)
            self._staging_file = tempfile.NamedTemporaryFile(
                dir=self.staging_dir, prefix=f"{self.path.stem}_", suffix=".stage", delete=False,
            )
        f = self._staging_file
        f.seek(0, os.SEEK_END)
        self._staged[s] = f.tell()
        f.write(raw)

    @property
    def staged_sources(self) -> list[int]:
        return sorted(self._staged)

    def commit(self) -> None:
        """Copy every staged block into place, ascending by source, then drop the staging file."""
        if not self._staged:
            return
        f = self._staging_file
        f.flush()
        size = self.header.block_size
        try:
            for s in sorted(self._staged):
                f.seek(self._staged[s])
                self._write_block(s, f.read(size))
            self._f.flush()
            os.fsync(self._f.fileno())
        finally:
            self._discard_staging()

    def rollback(self) -> None:
        self._discard_staging()

    def _discard_staging(self) -> None:
        self._staged.clear()
        if self._staging_file is not None:
            name = self._staging_file.name
            self._staging_file.close()
            self._staging_file = None
            try:
                os.remove(name)
            except FileNotFoundError:
                pass

    # ─── Growth ──────────────────────────────────────────────

    def grow(self, new_n: int, append_source: Optional[SourceData] = None) -> None:
        """
        Rewrite the file for new_n vertices. Every block gains unreachable
        entries; append_source (BD of the new last source) extends the range.
        """
        if self._staged:
            raise StoreFormatError("cannot grow a store with uncommitted staged blocks")
        if new_n < self.n:
            raise ValueError(f"cannot shrink store from n={self.n} to n={new_n}")
        hi = self.hi + (1 if append_source is not None else 0)
        header = StoreHeader(n=new_n, lo=self.lo, hi=hi, sigma_width=self.sigma_width)
        tmp = self.path.with_suffix(self.path.suffix + ".grow")
        try:
            with open(tmp, "wb") as out:
                out.write(header.pack())
                for s in range(self.lo, self.hi):
                    out.write(encode_block(s, self.load_source(s).grown(new_n), self.sigma_width))
                if append_source is not None:
                    out.write(encode_block(self.hi, append_source, self.sigma_width))
            self._f.close()
            os.replace(tmp, self.path)
        finally:
            if tmp.exists():
                tmp.unlink()
        self.header = header
        self._f = open(self.path, "r+b")
        log.debug(f"{self.path.name}: grown to n={new_n}, sources [{self.lo}, {self.hi})")


def create_store(
    path: str | Path,
    n: int,
    lo: int,
    hi: int,
    sigma_width: int,
    blocks: Iterable[SourceData],
    staging_dir: Optional[Path] = None,
) -> BdStore:
    """
    Write a fresh store. blocks must yield BD[lo], ..., BD[hi-1] in order.
    A partial file is removed if encoding fails.
    """
    path = Path(path)
    header = StoreHeader(n=n, lo=lo, hi=hi, sigma_width=sigma_width)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    try:
        with open(path, "wb") as f:
            f.write(header.pack())
            for s, data in zip(range(lo, hi), blocks):
                if data.n != n:
                    raise StoreFormatError(f"block for source {s} has n={data.n}, store has n={n}")
                f.write(encode_block(s, data, sigma_width))
                written += 1
        if written != hi - lo:
            raise StoreFormatError(f"expected {hi - lo} blocks for [{lo}, {hi}), got {written}")
    except BaseException:
        if path.exists():
            path.unlink()
        raise
    log.debug(f"Created {path.name}: n={n} sources [{lo}, {hi}) width={sigma_width} ({header.file_size} bytes)")
    return BdStore(path, header, staging_dir)


class StoreWriter:
    """
    Incremental writer used when blocks are produced one by one (Step 1
    streaming straight to disk): open, append in source order, finish.
    """

    def __init__(self, path: str | Path, n: int, lo: int, hi: int, sigma_width: int):
        self.path = Path(path)
        self.header = StoreHeader(n=n, lo=lo, hi=hi, sigma_width=sigma_width)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = open(self.path, "wb")
        self._f.write(self.header.pack())
        self._next = lo

    def append(self, s: int, data: SourceData) -> None:
        if s != self._next:
            raise StoreFormatError(f"blocks must be appended in order: expected {self._next}, got {s}")
        self._f.write(encode_block(s, data, self.header.sigma_width))
        self._next += 1

    def finish(self, staging_dir: Optional[Path] = None) -> BdStore:
        self._f.close()
        if self._next != self.header.hi:
            self.path.unlink()
            raise StoreFormatError(f"store {self.path.name} incomplete: stopped at source {self._next}")
        return BdStore(self.path, self.header, staging_dir)

    def abort(self) -> None:
        self._f.close()
        if self.path.exists():
            self.path.unlink()
