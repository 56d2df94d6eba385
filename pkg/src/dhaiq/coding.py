"""RLNC probe packets, packet pools and rank computation.

Every packet is handled as an augmented row: the k-symbol global encoding
vector followed by the p-symbol payload. Rank is always taken over the full
row, so a payload-only modification is as visible as a coefficient one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gf import GaloisField

GenerationId = tuple[int, int, int]


class ProtocolError(ValueError):
    """Packets from different generations or of mismatched shape were mixed."""


@dataclass
class ProbePacket:
    generation_id: GenerationId
    coefficients: np.ndarray
    payload: np.ndarray
    expiry_round: int

    @property
    def k(self) -> int:
        return len(self.coefficients)

    @property
    def p(self) -> int:
        return len(self.payload)

    @property
    def row(self) -> np.ndarray:
        return np.concatenate([self.coefficients, self.payload])

    def is_live(self, current_round: int) -> bool:
        return current_round < self.expiry_round

    @classmethod
    def from_row(cls, generation_id: GenerationId, row, k: int, expiry_round: int) -> ProbePacket:
        row = np.asarray(row)
        return cls(generation_id, row[:k].copy(), row[k:].copy(), expiry_round)

    def to_bytes(self, u: int = 8) -> bytes:
        """Trace-log encoding: generation id as three uint32, then coefficients, then payload.

        Symbols take one byte when u <= 8 and two little-endian bytes otherwise.
        """
        head = struct.pack("<3I", *self.generation_id)
        fmt = "<%d%s" % (self.k + self.p, "B" if u <= 8 else "H")
        return head + struct.pack(fmt, *(int(s) for s in self.row))

    @classmethod
    def from_bytes(cls, data: bytes, k: int, expiry_round: int = 0, u: int = 8) -> ProbePacket:
        gen = struct.unpack_from("<3I", data)
        width = 1 if u <= 8 else 2
        n_sym = (len(data) - 12) // width
        syms = struct.unpack_from("<%d%s" % (n_sym, "B" if u <= 8 else "H"), data, 12)
        dtype = np.uint8 if u <= 8 else np.uint16
        return cls.from_row(gen, np.array(syms, dtype=dtype), k, expiry_round)


def make_probe(
    gf: GaloisField,
    generation_id: GenerationId,
    index: int,
    k: int,
    p: int,
    expiry_round: int,
    rng: np.random.Generator,
) -> ProbePacket:
    """Probe number ``index``: unit coefficient vector, random payload."""
    coefficients = np.zeros(k, dtype=gf.dtype)
    coefficients[index] = 1
    return ProbePacket(generation_id, coefficients, gf.random_symbols(rng, p), expiry_round)


def row_reduce(rows, gf: GaloisField) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over the field. Returns (matrix, pivot columns)."""
    m = np.array(rows, dtype=gf.dtype, copy=True)
    if m.size == 0:
        return m.reshape(0, 0) if m.ndim < 2 else m, []
    n_rows, n_cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        pr = r + nz[0]
        if pr != r:
            m[[r, pr]] = m[[pr, r]]
        m[r] = gf.mul_array(gf.inv(int(m[r, c])), m[r])
        factors = m[:, c].copy()
        factors[r] = 0
        m ^= gf.mul_array(factors[:, None], m[r][None, :])
        pivots.append(c)
        r += 1
    return m, pivots


def rank(rows, gf: GaloisField) -> int:
    """Dimension of the span of ``rows``; an empty list has rank 0."""
    if len(rows) == 0:
        return 0
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise ValueError("rows must all have the same length")
    return len(row_reduce(rows, gf)[1])


@dataclass
class PacketPool:
    """A watchdog's buffer of innovative rows.

    ``rows`` keeps the packets as received. A pivot-indexed reduced echelon
    basis (row c holds the basis vector whose pivot is column c, or zeros)
    rides alongside so an incoming row reduces in one vectorised step.
    """

    gf: GaloisField
    width: int
    rows: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self._basis = np.zeros((self.width, self.width), dtype=self.gf.dtype)
        pending, self.rows = self.rows, []
        for row in pending:
            self.insert(row)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def rank(self) -> int:
        return len(self.rows)

    def reduce(self, row) -> np.ndarray:
        row = np.asarray(row, dtype=self.gf.dtype)
        if row.shape != (self.width,):
            raise ProtocolError(f"row of length {row.shape} does not fit pool width {self.width}")
        return row ^ np.bitwise_xor.reduce(self.gf.mul_array(row[:, None], self._basis), axis=0)

    def is_innovative(self, row) -> bool:
        return bool(self.reduce(row).any())

    def insert(self, row) -> bool:
        reduced = self.reduce(row)
        nz = np.flatnonzero(reduced)
        if nz.size == 0:
            return False
        pivot = nz[0]
        y = self.gf.mul_array(self.gf.inv(int(reduced[pivot])), reduced)
        self._basis ^= self.gf.mul_array(self._basis[:, pivot][:, None], y[None, :])
        self._basis[pivot] = y
        self.rows.append(np.array(row, dtype=self.gf.dtype))
        return True

    def basis_rows(self) -> np.ndarray:
        return self._basis[self._basis.any(axis=1)]


def _row_of(packet) -> np.ndarray:
    return packet.row if isinstance(packet, ProbePacket) else np.asarray(packet)


def is_innovative(packet, pool: PacketPool) -> bool:
    return pool.is_innovative(_row_of(packet))


def insert_if_innovative(pool: PacketPool, packet) -> bool:
    return pool.insert(_row_of(packet))


def local_encode(
    buffer: Sequence[ProbePacket],
    gf: GaloisField,
    rng: np.random.Generator,
    betas: Sequence[int] | None = None,
) -> ProbePacket:
    """Random linear combination of the buffered packets.

    Each coefficient is uniform over the whole field, so the all-zero
    combination is a legitimate (if useless) output. ``betas`` overrides
    the draw.
    """
    if not buffer:
        raise ValueError("cannot encode from an empty buffer")
    first = buffer[0]
    for pkt in buffer[1:]:
        if pkt.generation_id != first.generation_id:
            raise ProtocolError(f"mixed generations {first.generation_id} and {pkt.generation_id}")
        if pkt.k != first.k or pkt.p != first.p:
            raise ProtocolError("packets in a generation must share k and p")
    if betas is None:
        betas = gf.random_symbols(rng, len(buffer))
    elif len(betas) != len(buffer):
        raise ValueError("need one coefficient per buffered packet")
    rows = np.stack([pkt.row for pkt in buffer])
    out = np.bitwise_xor.reduce(gf.mul_array(np.asarray(betas, dtype=gf.dtype)[:, None], rows), axis=0)
    return ProbePacket.from_row(first.generation_id, out, first.k, first.expiry_round)
