"""Striped matrix files and their parallel assembly.

A Hermitian matrix is stored as its lower triangle, split by rows over
``part_<k>.bsem`` files with a ``manifest.txt``.  Assembly mirrors a
distributed code with ``R`` logical ranks (threads exchanging messages
through per-pair channels):

1. every rank reads its contiguous stripe of rows concurrently,
2. the upper triangle is filled from conj-transposed blocks sent by the
   ranks owning the corresponding rows,
3. stripes are redistributed to a square Cartesian grid of 2D blocks.

File layout (little endian)::

    magic     8 bytes  b"BSEMAT01"
    version   u32
    n         u64      matrix order
    row_start u64
    row_count u64
    payload   for r in [row_start, row_start + row_count): entries (r, 0..r)
              as complex128 (re, im doubles)
"""
from __future__ import annotations

import hashlib
import math
import queue
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, FormatError, LayoutError

MAGIC = b"BSEMAT01"
VERSION = 1
HEADER = struct.Struct("<8sIQQQ")
ENTRY = np.dtype("<c16")
MANIFEST = "manifest.txt"


@dataclass(frozen=True)
class StripedFileHeader:
    n: int
    row_start: int
    row_count: int
    version: int = VERSION
    path: str | None = None

    @property
    def row_stop(self):
        return self.row_start + self.row_count

    @property
    def payload_entries(self):
        return tri(self.row_stop) - tri(self.row_start)

    def pack(self):
        return HEADER.pack(MAGIC, self.version, self.n, self.row_start,
                           self.row_count)


@dataclass
class TransferLog:
    messages: int = 0
    bytes: int = 0
    max_single_reader_seconds: float = 0.0
    completion_seconds: float = 0.0
    io_bytes: int = 0


def tri(r):
    """Number of lower-triangle entries in rows ``0..r-1``."""
    return r * (r + 1) // 2


def row_partition(n, parts):
    """Contiguous near-equal ranges; earlier parts get the extra rows."""
    base, extra = divmod(n, parts)
    out, start = [], 0
    for p in range(parts):
        stop = start + base + (1 if p < extra else 0)
        out.append((start, stop))
        start = stop
    return out


@dataclass
class RankLayout:
    """Striped and blocked decompositions of an ``n x n`` matrix over ranks."""
    n: int
    ranks: int
    striped: list = field(init=False)
    grid: int | None = field(init=False)
    row_blocks: list | None = field(init=False)

    def __post_init__(self):
        if self.ranks < 1:
            raise LayoutError("need at least one rank")
        self.striped = row_partition(self.n, self.ranks)
        q = math.isqrt(self.ranks)
        if q * q == self.ranks:
            self.grid = q
            self.row_blocks = row_partition(self.n, q)
        else:
            self.grid = None
            self.row_blocks = None

    @property
    def is_square(self):
        return self.grid is not None

    def require_grid(self):
        if not self.is_square:
            raise LayoutError(
                f"blocked layout needs a square number of ranks, got {self.ranks}")

    def grid_coords(self, rank):
        self.require_grid()
        return divmod(rank, self.grid)

    def block_ranges(self, rank):
        """``((row_start, row_stop), (col_start, col_stop))`` of a grid rank."""
        i, j = self.grid_coords(rank)
        return self.row_blocks[i], self.row_blocks[j]

    def owner(self, row):
        for p, (s, e) in enumerate(self.striped):
            if s <= row < e:
                return p
        raise LayoutError(f"row {row} outside [0, {self.n})")

    def completion_bytes(self):
        """Strict-upper volume crossing stripe boundaries, in bytes."""
        sizes = [e - s for s, e in self.striped]
        return ENTRY.itemsize * sum(
            sizes[p] * sum(sizes[p + 1:]) for p in range(len(sizes)))


# -- writing -----------------------------------------------------------------

def matrix_checksum(H):
    """SHA-256 of the lower triangle, row by row, as little-endian complex128."""
    h = hashlib.sha256()
    H = np.asarray(H)
    for r in range(H.shape[0]):
        h.update(np.ascontiguousarray(H[r, :r + 1], dtype=ENTRY).tobytes())
    return h.hexdigest()


def write_striped(H, directory, num_files, n=None):
    """Write the lower triangle of ``H`` to ``num_files`` striped files.

    ``H`` is a square array or a callable ``row(r)`` returning at least the
    first ``r + 1`` entries of row ``r`` (then ``n`` is required).
    """
    if num_files < 1:
        raise ValueError("num_files must be at least 1")
    if callable(H):
        if n is None:
            raise ValueError("n is required with a row generator")
        row = H
    else:
        H = np.asarray(H)
        n = H.shape[0]
        row = H.__getitem__
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256()
    headers = []
    for k, (start, stop) in enumerate(row_partition(n, num_files)):
        path = directory / f"part_{k}.bsem"
        hdr = StripedFileHeader(n=n, row_start=start, row_count=stop - start,
                                path=str(path))
        try:
            with open(path, "wb") as f:
                f.write(hdr.pack())
                for r in range(start, stop):
                    data = np.ascontiguousarray(np.asarray(row(r))[:r + 1],
                                                dtype=ENTRY).tobytes()
                    f.write(data)
                    digest.update(data)
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        headers.append(hdr)
    lines = [f"n = {n}", f"num_files = {num_files}"]
    lines += [f"part_{k} = {h.row_start} {h.row_count}" for k, h in enumerate(headers)]
    lines.append(f"checksum = {digest.hexdigest()}")
    (directory / MANIFEST).write_text("\n".join(lines) + "\n")
    return headers


# -- reading -----------------------------------------------------------------

def read_manifest(directory):
    directory = Path(directory)
    path = directory / MANIFEST
    if not path.exists():
        raise FormatError(f"missing {path}")
    info = {"parts": {}}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("part_"):
            start, count = (int(x) for x in value.split())
            info["parts"][int(key[5:])] = (start, count)
        elif key == "checksum":
            info["checksum"] = value
        else:
            info[key] = int(value)
    return info


def read_header(path):
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n, start, count = HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    hdr = StripedFileHeader(n=n, row_start=start, row_count=count,
                            version=version, path=str(path))
    expected = HEADER.size + ENTRY.itemsize * hdr.payload_entries
    if path.stat().st_size != expected:
        raise FormatError(f"{path}: size {path.stat().st_size} != {expected}")
    return hdr


def scan_directory(directory):
    """Headers of all parts, validated to partition ``[0, n)``."""
    directory = Path(directory)
    info = read_manifest(directory)
    headers = [read_header(directory / f"part_{k}.bsem")
               for k in sorted(info["parts"])]
    if not headers:
        raise LayoutError(f"{directory}: no matrix parts")
    n = headers[0].n
    if any(h.n != n for h in headers) or info.get("n", n) != n:
        raise LayoutError(f"{directory}: parts disagree on the matrix order")
    pos = 0
    for h in sorted(headers, key=lambda h: (h.row_start, h.row_stop)):
        if h.row_count == 0:
            continue
        if h.row_start != pos:
            kind = "overlap" if h.row_start < pos else "gap"
            raise LayoutError(f"{directory}: row coverage {kind} at row {pos}")
        pos = h.row_stop
    if pos != n:
        raise LayoutError(f"{directory}: rows {pos}..{n} not covered")
    return n, headers, info


def _read_rows(hdr, lo, hi, out, out_row0):
    """Read rows ``[lo, hi)`` of one file into the lower part of ``out``."""
    offset = HEADER.size + ENTRY.itemsize * (tri(lo) - tri(hdr.row_start))
    count = tri(hi) - tri(lo)
    with open(hdr.path, "rb") as f:
        f.seek(offset)
        data = np.frombuffer(f.read(ENTRY.itemsize * count), dtype=ENTRY)
    if data.size != count:
        raise FormatError(f"{hdr.path}: truncated payload")
    pos = 0
    for r in range(lo, hi):
        out[r - out_row0, :r + 1] = data[pos:pos + r + 1]
        pos += r + 1
    return ENTRY.itemsize * count


def read_striped_concurrent(directory, layout, serialize=False,
                            start_order=None):
    """Each logical rank reads its own stripe of lower-triangle rows.

    Returns ``(buffers, log)`` where ``buffers[p]`` is a ``(rows_p, n)``
    array holding the lower triangle of rank ``p``'s rows (upper part zero).
    ``serialize=True`` lets only one reader touch the files at a time.
    """
    n, headers, _ = scan_directory(directory)
    if layout.n != n:
        raise LayoutError(f"layout is for n={layout.n}, files hold n={n}")
    buffers = [np.zeros((e - s, n), dtype=np.complex128) for s, e in layout.striped]
    elapsed = [0.0] * layout.ranks
    nbytes = [0] * layout.ranks
    lock = threading.Lock() if serialize else None

    def reader(p):
        s, e = layout.striped[p]
        t0 = time.perf_counter()
        if lock is not None:
            lock.acquire()
        try:
            for h in headers:
                lo, hi = max(s, h.row_start), min(e, h.row_stop)
                if lo < hi:
                    nbytes[p] += _read_rows(h, lo, hi, buffers[p], s)
        finally:
            if lock is not None:
                lock.release()
        elapsed[p] = time.perf_counter() - t0

    order = list(range(layout.ranks)) if start_order is None else list(start_order)
    if sorted(order) != list(range(layout.ranks)):
        raise LayoutError("start_order must be a permutation of the ranks")
    t0 = time.perf_counter()
    _run_ranks(layout.ranks, reader, order)
    log = TransferLog(max_single_reader_seconds=max(elapsed, default=0.0),
                      completion_seconds=time.perf_counter() - t0,
                      io_bytes=sum(nbytes))
    return buffers, log


# -- message passing ---------------------------------------------------------

class Channels:
    """One FIFO per ordered (sender, receiver) pair; receives block."""

    def __init__(self, ranks):
        self._q = {(a, b): queue.Queue() for a in range(ranks)
                   for b in range(ranks) if a != b}
        self._lock = threading.Lock()
        self.messages = 0
        self.bytes = 0

    def send(self, src, dst, payload, tag=None):
        payload = np.array(payload, copy=True)
        with self._lock:
            self.messages += 1
            self.bytes += payload.nbytes
        self._q[(src, dst)].put((tag, payload))

    def recv(self, src, dst):
        return self._q[(src, dst)].get(timeout=60)


def _run_ranks(ranks, fn, order=None):
    order = range(ranks) if order is None else order
    with ThreadPoolExecutor(max_workers=max(ranks, 1)) as pool:
        futures = [pool.submit(fn, p) for p in order]
        for fut in futures:
            fut.result()


def hermitian_complete(buffers, layout):
    """Fill the upper triangle of every stripe.

    Rank ``q`` sends the block of its rows that lies in rank ``p``'s column
    range to every lower rank ``p``; the receiver stores its conjugate
    transpose.  Receives are handled in ascending sender order.
    """
    n = layout.n
    chan = Channels(layout.ranks)
    full = [b.copy() for b in buffers]

    def work(p):
        s, e = layout.striped[p]
        for q in range(p):
            qs, qe = layout.striped[q]
            if e > s and qe > qs:
                chan.send(p, q, buffers[p][:, qs:qe])
        if e == s:
            return
        own = full[p][:, s:e]
        lower = np.tril(own, -1)
        full[p][:, s:e] = lower + lower.conj().T + np.diag(np.diag(own))
        for q in range(p + 1, layout.ranks):
            qs, qe = layout.striped[q]
            if qe > qs:
                _, block = chan.recv(q, p)
                full[p][:, qs:qe] = block.conj().T

    t0 = time.perf_counter()
    _run_ranks(layout.ranks, work)
    log = TransferLog(messages=chan.messages, bytes=chan.bytes,
                      completion_seconds=time.perf_counter() - t0)
    assert all(f.shape == (e - s, n) for f, (s, e) in zip(full, layout.striped))
    return full, log


def redistribute_striped_to_blocked(rows, layout):
    """Move full striped rows onto the square grid of 2D blocks.

    Out of place: the striped buffers are left untouched.  Returns
    ``(blocks, log)`` with ``blocks[g]`` the block of grid rank ``g``.
    """
    layout.require_grid()
    chan = Channels(layout.ranks)
    blocks = [None] * layout.ranks

    def work(p):
        s, e = layout.striped[p]
        for g in range(layout.ranks):
            (rs, re), (cs, ce) = layout.block_ranges(g)
            lo, hi = max(s, rs), min(e, re)
            if g != p and lo < hi and ce > cs:
                chan.send(p, g, rows[p][lo - s:hi - s, cs:ce], tag=lo)
        (rs, re), (cs, ce) = layout.block_ranges(p)
        block = np.zeros((re - rs, ce - cs), dtype=np.complex128)
        for q in range(layout.ranks):
            qs, qe = layout.striped[q]
            lo, hi = max(qs, rs), min(qe, re)
            if lo >= hi or ce == cs:
                continue
            if q == p:
                block[lo - rs:hi - rs] = rows[p][lo - qs:hi - qs, cs:ce]
            else:
                tag, part = chan.recv(q, p)
                block[tag - rs:tag - rs + part.shape[0]] = part
        blocks[p] = block

    t0 = time.perf_counter()
    _run_ranks(layout.ranks, work)
    log = TransferLog(messages=chan.messages, bytes=chan.bytes,
                      completion_seconds=time.perf_counter() - t0)
    return blocks, log


def gather_blocked(blocks, layout, checksum=None):
    """Reassemble the matrix from grid blocks, optionally verifying a checksum."""
    layout.require_grid()
    if len(blocks) != layout.ranks or any(b is None for b in blocks):
        raise LayoutError("missing block in gather")
    H = np.empty((layout.n, layout.n), dtype=np.complex128)
    for g, block in enumerate(blocks):
        (rs, re), (cs, ce) = layout.block_ranges(g)
        if block.shape != (re - rs, ce - cs):
            raise LayoutError(f"block {g} has shape {block.shape}")
        H[rs:re, cs:ce] = block
    if checksum is not None and matrix_checksum(H) != checksum:
        raise ChecksumMismatch("gathered matrix does not match the checksum")
    return H


@dataclass
class AssemblyTimings:
    read: float
    complete: float
    redistribute: float
    logs: dict


def load_distributed(directory, ranks, serialize=False, verify=True):
    """Run the read -> complete -> redistribute -> gather pipeline."""
    n, _, info = scan_directory(directory)
    layout = RankLayout(n, ranks)
    t0 = time.perf_counter()
    stripes, read_log = read_striped_concurrent(directory, layout, serialize)
    t1 = time.perf_counter()
    rows, comp_log = hermitian_complete(stripes, layout)
    t2 = time.perf_counter()
    blocks, redist_log = redistribute_striped_to_blocked(rows, layout)
    t3 = time.perf_counter()
    H = gather_blocked(blocks, layout,
                       info.get("checksum") if verify else None)
    timings = AssemblyTimings(read=t1 - t0, complete=t2 - t1,
                              redistribute=t3 - t2,
                              logs={"read": read_log, "complete": comp_log,
                                    "redistribute": redist_log})
    return H, timings
