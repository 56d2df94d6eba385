"""Hierarchical watchdog detection of packet-modifying nodes.

One *generation* is four corner watchdogs flooding unit-vector probes
through their monitoring area for a fixed number of synchronous rounds.
Every node keeps only innovative rows; a watchdog whose pool rank exceeds
the number of probes has seen something outside the probe span, so the
area holds an adversary and is split into quadrants. Quadrants whose
estimated node count falls under ``mu`` are marked wholesale.

All generations of one quadtree level are disjoint in space, so
:func:`run_generations` simulates them together; results are identical in
kind to running them one after another.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .coding import PacketPool, ProbePacket, GenerationId
from .gf import GaloisField
from .topology import Deployment, MonitoringArea, corner_watchdogs, nodes_in, root_area, subdivide

ADVERSARY_MODES = ("payload", "coefficients", "both")


@dataclass(frozen=True)
class AdversaryModel:
    mode: str = "both"
    act_normal_as_watchdog: bool = False

    def __post_init__(self):
        if self.mode not in ADVERSARY_MODES:
            raise ValueError(f"adversary mode must be one of {ADVERSARY_MODES}, got {self.mode!r}")

    def target_range(self, k: int, p: int) -> tuple[int, int]:
        """Half-open symbol index range the corruption may hit."""
        if self.mode == "payload":
            return k, k + p
        if self.mode == "coefficients":
            return 0, k
        return 0, k + p


@dataclass
class ProtocolParams:
    gf: GaloisField = field(default_factory=GaloisField)
    k: int = 4
    p: int = 16
    mu: float = 5.0
    model: AdversaryModel = field(default_factory=AdversaryModel)

    @property
    def width(self) -> int:
        return self.k + self.p


@dataclass
class GenerationState:
    """Static description of one generation.

    The per-node buffers and round counter live inside the simulator while
    the generation runs.
    """

    generation_id: GenerationId
    area: MonitoringArea
    members: np.ndarray
    watchdogs: list[int]
    expiry_round: int


@dataclass
class GenerationResult:
    generation_id: GenerationId
    area: MonitoringArea
    watchdogs: list[int]
    ranks: dict[int, int]
    transmissions: int
    rounds: int
    detected: bool
    skipped: bool = False
    _bases: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _params: ProtocolParams | None = field(default=None, repr=False)

    @property
    def pools(self) -> dict[int, PacketPool]:
        """Final watchdog pools, rebuilt from the simulator's echelon bases."""
        out = {}
        for w, basis in self._bases.items():
            out[w] = PacketPool(self._params.gf, self._params.width, [row for row in basis if row.any()])
        return out


class TraceLog:
    """Per-reception record: round, sender, receiver, innovative?, receiver pool rank."""

    def __init__(self):
        self.records: list[tuple[GenerationId, int, int, int, bool, int]] = []

    def add(self, gen_id, rnd, sender, receiver, innovative, rank):
        self.records.append((gen_id, rnd, sender, receiver, innovative, rank))

    def write(self, fh: TextIO) -> None:
        fh.write("# generation round sender receiver innovative rank\n")
        for gen_id, rnd, s, r, innov, rank in self.records:
            g = ".".join(str(v) for v in gen_id)
            fh.write(f"{g} {rnd} {s} {r} {int(innov)} {rank}\n")


class SuspectTable:
    def __init__(self):
        self.levels: Counter[int] = Counter()

    def mark(self, ids: Iterable[int]) -> None:
        for i in ids:
            self.levels[int(i)] += 1

    def level(self, node: int) -> int:
        return self.levels.get(node, 0)

    def suspects(self, threshold: int = 1) -> list[int]:
        return sorted(i for i, lvl in self.levels.items() if lvl >= threshold)


@dataclass
class RunMetrics:
    marked: list[int]
    innocent_ratio: float
    catch_ratio: float
    probe_transmissions: int
    rounds_elapsed: int
    levels_triggered: int
    generations: int = 0
    skipped_generations: int = 0
    max_watchdog_rank: int = 0
    marked_areas: list[MonitoringArea] = field(default_factory=list, repr=False)


def timestamp_rounds(k_est: float) -> int:
    """Generation lifetime in rounds: ceil(sqrt(2 * estimated node count)), at least 1."""
    if k_est < 0:
        raise ValueError("estimated node count must be non-negative")
    v = 2 * k_est
    if float(v).is_integer():
        s = math.isqrt(int(v))
        rounds = s if s * s == int(v) else s + 1
    else:
        rounds = math.ceil(math.sqrt(v))
    return max(1, rounds)


def corrupt(packet: ProbePacket, model: AdversaryModel, gf: GaloisField, rng: np.random.Generator) -> ProbePacket:
    """Replace one symbol of the targeted block with a different uniform symbol."""
    row = packet.row
    lo, hi = model.target_range(packet.k, packet.p)
    pos = int(rng.integers(lo, hi))
    # XOR with a nonzero offset is a uniform draw over the q-1 other values
    row[pos] ^= int(rng.integers(1, gf.q))
    return ProbePacket.from_row(packet.generation_id, row, packet.k, packet.expiry_round)


def _corrupt_rows(rows: np.ndarray, model: AdversaryModel, k: int, p: int, q: int, rng) -> None:
    lo, hi = model.target_range(k, p)
    pos = rng.integers(lo, hi, size=len(rows))
    offsets = rng.integers(1, q, size=len(rows)).astype(rows.dtype)
    rows[np.arange(len(rows)), pos] ^= offsets


def detect(pool: PacketPool | int, k: int = 4) -> bool:
    """Rank above the probe count means a row from outside the probe span arrived."""
    r = pool if isinstance(pool, (int, np.integer)) else pool.rank
    return int(r) > k


class _Pools:
    """Reduced echelon bases for many nodes at once.

    Node i holds ``rank[i]`` basis rows in ``rows[i, :rank[i]]``; row t has
    its leading 1 in column ``pivots[i, t]`` and zeros in every other
    pivot column. Unused pivot slots point at a padding column that is
    always zero, so reduction cost scales with rank rather than width.
    """

    def __init__(self, gf: GaloisField, m: int, width: int):
        self.gf = gf
        self.width = width
        self.rows = np.zeros((m, width, width), dtype=gf.dtype)
        self.pivots = np.full((m, width), width, dtype=np.int64)
        self.rank = np.zeros(m, dtype=np.int64)

    def encode(self, senders: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        r = int(self.rank[senders].max()) if senders.size else 0
        betas = self.gf.random_symbols(rng, (len(senders), self.width))[:, :r]
        return np.bitwise_xor.reduce(self.gf.mul_array(betas[:, :, None], self.rows[senders, :r]), axis=1)

    def absorb(self, dst: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Insert ``rows[i]`` into the pool of node ``dst[i]``; ``dst`` must be unique."""
        gf, width = self.gf, self.width
        innovative = np.zeros(len(dst), dtype=bool)
        # a full-rank pool can take nothing new
        open_ = np.flatnonzero(self.rank[dst] < width)
        if open_.size == 0:
            return innovative
        d, x = dst[open_], rows[open_]
        x = self._reduce(d, x)
        new = x.any(axis=1)
        innovative[open_] = new
        idx = np.flatnonzero(new)
        if idx.size == 0:
            return innovative
        d, x = d[idx], x[idx]
        ar = np.arange(idx.size)
        piv = np.argmax(x != 0, axis=1)
        y = gf.mul_array(gf.inv_table[x[ar, piv]][:, None], x)
        rk = self.rank[d]
        r = int(rk.max())
        if r:
            b = self.rows[d, :r]
            b ^= gf.mul_array(b[ar, :, piv][:, :, None], y[:, None, :])
            self.rows[d, :r] = b
        self.rows[d, rk] = y
        self.pivots[d, rk] = piv
        self.rank[d] = rk + 1
        return innovative

    def _reduce(self, d: np.ndarray, x: np.ndarray) -> np.ndarray:
        r = int(self.rank[d].max())
        if r == 0:
            return x
        padded = np.concatenate([x, np.zeros((len(x), 1), dtype=x.dtype)], axis=1)
        coeff = np.take_along_axis(padded, self.pivots[d, :r], axis=1)
        return x ^ np.bitwise_xor.reduce(self.gf.mul_array(coeff[:, :, None], self.rows[d, :r]), axis=1)

    def basis(self, i: int) -> np.ndarray:
        return self.rows[i, : self.rank[i]].copy()


def run_generations(
    gens: Sequence[GenerationState],
    net: Deployment,
    params: ProtocolParams,
    rng: np.random.Generator,
    trace: TraceLog | None = None,
) -> list[GenerationResult]:
    """Simulate spatially disjoint generations side by side.

    Round 0: each watchdog stores its probe and broadcasts it. Rounds
    1..expiry-1: every node holding at least one row broadcasts one random
    combination of its pool, computed from the pool as it stood at the start
    of the round. Receivers outside the sender's area drop the packet, so
    only in-area links are materialised. Receptions at a node are applied
    in ascending sender id.
    """
    gf, k, p, width = params.gf, params.k, params.p, params.width
    results: list[GenerationResult | None] = [None] * len(gens)
    live = []
    for gi, g in enumerate(gens):
        if len(g.watchdogs) == 0:
            results[gi] = GenerationResult(g.generation_id, g.area, [], {}, 0, 0, False, skipped=True)
        else:
            live.append(gi)
    if not live:
        return results  # type: ignore[return-value]

    ids = np.concatenate([np.asarray(gens[gi].members, dtype=np.int64) for gi in live])
    gen_of = np.concatenate([np.full(len(gens[gi].members), j) for j, gi in enumerate(live)])
    m = len(ids)
    local = np.full(net.n, -1, dtype=np.int64)
    local[ids] = np.arange(m)
    area_of = np.full(net.n, -1, dtype=np.int64)
    area_of[ids] = gen_of
    expiry = np.array([gens[gi].expiry_round for gi in live], dtype=np.int64)[gen_of]

    # in-area directed links, grouped by receiver then ascending sender
    src_l, dst_l = [], []
    for li, gid in enumerate(ids):
        nbrs = net.graph.adjacency[gid]
        nbrs = nbrs[area_of[nbrs] == gen_of[li]]
        src_l.append(local[nbrs])
        dst_l.append(np.full(len(nbrs), li))
    src = np.concatenate(src_l) if src_l else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst_l) if dst_l else np.zeros(0, dtype=np.int64)
    order = np.lexsort((src, dst))
    src, dst = src[order], dst[order]

    is_adv = net.adversary_mask[ids]
    is_wd = np.zeros(m, dtype=bool)
    wd_index = np.full(m, -1, dtype=np.int64)
    for gi in live:
        for u, w in enumerate(gens[gi].watchdogs):
            is_wd[local[w]] = True
            wd_index[local[w]] = u
    corrupting = is_adv.copy()
    if params.model.act_normal_as_watchdog:
        corrupting &= ~is_wd

    pools = _Pools(gf, m, width)
    rank = pools.rank
    tx = np.zeros(len(live), dtype=np.int64)
    horizon = int(expiry.max())

    for rnd in range(horizon):
        if rnd == 0:
            senders = np.flatnonzero(is_wd)
            out = np.zeros((len(senders), width), dtype=gf.dtype)
            out[np.arange(len(senders)), wd_index[senders]] = 1
            out[:, k:] = gf.random_symbols(rng, (len(senders), p))
        else:
            senders = np.flatnonzero((rank > 0) & (expiry > rnd))
            if senders.size == 0:
                break
            out = pools.encode(senders, rng)
        bad = corrupting[senders]
        if bad.any():
            rows = out[bad]
            _corrupt_rows(rows, params.model, k, p, gf.q, rng)
            out[bad] = rows
        np.add.at(tx, gen_of[senders], 1)
        if rnd == 0:
            # watchdogs keep what they emitted
            pools.absorb(senders, out)

        slot_of = np.full(m, -1, dtype=np.int64)
        slot_of[senders] = np.arange(len(senders))
        sel = slot_of[src] >= 0
        e_src, e_dst = src[sel], dst[sel]
        if e_src.size == 0:
            continue
        starts = np.r_[0, np.flatnonzero(np.diff(e_dst)) + 1]
        group_len = np.diff(np.r_[starts, e_dst.size])
        slot = np.arange(e_dst.size) - np.repeat(starts, group_len)
        for j in range(int(slot.max()) + 1):
            s = slot == j
            d, sp = e_dst[s], e_src[s]
            innov = pools.absorb(d, out[slot_of[sp]])
            if trace is not None:
                for a, b, ok in zip(sp, d, innov):
                    g = gens[live[gen_of[a]]]
                    trace.add(g.generation_id, rnd, int(ids[a]), int(ids[b]), bool(ok), int(rank[b]))

    for j, gi in enumerate(live):
        g = gens[gi]
        ranks = {w: int(rank[local[w]]) for w in g.watchdogs}
        bases = {w: pools.basis(local[w]) for w in g.watchdogs}
        results[gi] = GenerationResult(
            g.generation_id,
            g.area,
            list(g.watchdogs),
            ranks,
            int(tx[j]),
            int(g.expiry_round),
            any(detect(r, k) for r in ranks.values()),
            _bases=bases,
            _params=params,
        )
    return results  # type: ignore[return-value]


def run_generation(gen, net, params, rng, trace=None) -> GenerationResult:
    return run_generations([gen], net, params, rng, trace)[0]


def make_generation(area: MonitoringArea, net: Deployment, generation_id: GenerationId) -> GenerationState:
    members = np.asarray(nodes_in(area, net.xy), dtype=np.int64)
    watchdogs = corner_watchdogs(area, net.xy, members)
    return GenerationState(generation_id, area, members, watchdogs, timestamp_rounds(area.estimated_count))


def compute_metrics(marked: Iterable[int], adversaries: Iterable[int], n: int, z0: int) -> tuple[float, float]:
    """(innocent ratio, catch ratio); the catch ratio is 1 when there is nothing to catch."""
    if z0 < 0:
        raise ValueError("z0 must be non-negative")
    marked, adversaries = set(marked), set(adversaries)
    innocent = len(marked - adversaries) / n
    catch = len(marked & adversaries) / z0 if z0 else 1.0
    return innocent, catch


def dhaiq_run(
    net: Deployment,
    params: ProtocolParams,
    rng: np.random.Generator,
    origin_shift: tuple[float, float] = (0.0, 0.0),
    suspects: SuspectTable | None = None,
    run_index: int = 0,
    trace: TraceLog | None = None,
) -> RunMetrics:
    """One top-down pass of the quadtree, breadth first, one level at a time."""
    if params.mu < 1:
        raise ValueError("mu must be at least 1")
    suspects = suspects if suspects is not None else SuspectTable()
    frontier = deque([root_area(net.side, net.density, origin_shift)])
    marked: set[int] = set()
    marked_areas: list[MonitoringArea] = []
    tx = rounds = levels = n_gens = skipped = max_rank = 0
    area_counter = 0
    while frontier:
        gens = []
        for area in frontier:
            if area.is_empty:
                continue
            if area.estimated_count < params.mu:
                members = nodes_in(area, net.xy)
                suspects.mark(members)
                marked.update(members)
                marked_areas.append(area)
                continue
            gen = make_generation(area, net, (run_index, area.level, area_counter))
            area_counter += 1
            if len(gen.members) == 0:
                continue
            gens.append(gen)
        frontier = deque()
        if not gens:
            break
        results = run_generations(gens, net, params, rng, trace)
        levels += 1
        rounds += max(g.expiry_round for g in gens)
        for res in results:
            n_gens += 1
            skipped += res.skipped
            tx += res.transmissions
            if res.ranks:
                max_rank = max(max_rank, max(res.ranks.values()))
            if res.detected:
                frontier.extend(subdivide(res.area))
    innocent, catch = compute_metrics(marked, net.adversary_ids, net.n, len(net.adversary_ids))
    return RunMetrics(
        sorted(marked), innocent, catch, tx, rounds, levels, n_gens, skipped, max_rank, marked_areas
    )


def least_area_edge(side: float, n: int, mu: float) -> float:
    """Edge of the first quadtree level whose estimated node count drops below mu."""
    count, edge = float(n), float(side)
    while count >= mu:
        count /= 4
        edge /= 2
    return edge


@dataclass
class ShiftResult:
    final: RunMetrics
    runs: list[RunMetrics]
    suspects: SuspectTable


def run_with_shift(
    net: Deployment,
    params: ProtocolParams,
    rng: np.random.Generator,
    runs: int = 2,
    threshold: int | None = None,
) -> ShiftResult:
    """Repeat detection with the grid origin moved diagonally by edge/runs each time.

    With the default two runs the second grid sits half a least-area edge
    off the first. Final suspects are nodes marked in at least
    ``threshold`` runs (default: all of them).
    """
    if runs < 2:
        raise ValueError("the shift scheme needs at least two runs")
    threshold = runs if threshold is None else threshold
    edge = least_area_edge(net.side, net.n, params.mu)
    table = SuspectTable()
    per_run = []
    for i in range(runs):
        offset = i * edge / runs
        per_run.append(dhaiq_run(net, params, rng, (offset, offset), table, run_index=i))
    final_ids = table.suspects(threshold)
    innocent, catch = compute_metrics(final_ids, net.adversary_ids, net.n, len(net.adversary_ids))
    final = RunMetrics(
        final_ids,
        innocent,
        catch,
        sum(r.probe_transmissions for r in per_run),
        sum(r.rounds_elapsed for r in per_run),
        max(r.levels_triggered for r in per_run),
        sum(r.generations for r in per_run),
        sum(r.skipped_generations for r in per_run),
        max(r.max_watchdog_rank for r in per_run),
    )
    return ShiftResult(final, per_run, table)
