"""Node placement, unit-disk connectivity and monitoring-area geometry."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree


class ConfigError(ValueError):
    pass


@dataclass
class NodeRecord:
    id: int
    x: float
    y: float
    is_adversary: bool = False

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def place_nodes(n: int, side: float, rng: np.random.Generator) -> list[NodeRecord]:
    if n < 1:
        raise ConfigError(f"need at least one node, got n={n}")
    if side <= 0:
        raise ConfigError(f"deployment side must be positive, got {side}")
    xy = rng.uniform(0.0, side, size=(n, 2))
    return [NodeRecord(i, float(x), float(y)) for i, (x, y) in enumerate(xy)]


def positions(nodes: Sequence[NodeRecord]) -> np.ndarray:
    return np.array([(nd.x, nd.y) for nd in nodes], dtype=float).reshape(-1, 2)


def place_adversaries(
    nodes: Sequence[NodeRecord],
    z0: int,
    dist: str = "uniform",
    params: dict | None = None,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Mark exactly ``z0`` nodes as adversaries and return their ids (sorted).

    ``uniform`` picks a uniformly random subset. ``gaussian`` draws z0 points
    from an isotropic normal (``params``: ``mean`` and ``sigma``) and lets
    each point claim the nearest node not claimed yet.
    """
    n = len(nodes)
    if not 0 <= z0 <= n:
        raise ConfigError(f"adversary count z0={z0} outside [0, {n}]")
    rng = rng if rng is not None else np.random.default_rng()
    params = params or {}
    for nd in nodes:
        nd.is_adversary = False
    if dist == "uniform":
        chosen = rng.choice(n, size=z0, replace=False) if z0 else []
    elif dist == "gaussian":
        xy = positions(nodes)
        mean = np.asarray(params.get("mean", (0.0, 0.0)), dtype=float)
        sigma = float(params.get("sigma", 1.0))
        points = rng.normal(mean, sigma, size=(z0, 2))
        claimed = np.zeros(n, dtype=bool)
        chosen = []
        for pt in points:
            d2 = ((xy - pt) ** 2).sum(axis=1)
            d2[claimed] = np.inf
            j = int(np.argmin(d2))
            claimed[j] = True
            chosen.append(j)
    else:
        raise ConfigError(f"unknown adversary distribution {dist!r}")
    for j in chosen:
        nodes[int(j)].is_adversary = True
    return sorted(int(j) for j in chosen)


class Graph:
    """Undirected unit-disk graph; ``adjacency[i]`` is an ascending id array."""

    def __init__(self, adjacency: list[np.ndarray]):
        self.adjacency = adjacency

    def __len__(self) -> int:
        return len(self.adjacency)

    def neighbors(self, i: int) -> np.ndarray:
        return self.adjacency[i]

    def edges(self):
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i < j:
                    yield i, int(j)

    def is_connected(self) -> bool:
        n = len(self.adjacency)
        if n == 0:
            return True
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in self.adjacency[i]:
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
        return bool(seen.all())


def build_graph(nodes, r: float) -> Graph:
    """Edge between i and j iff d(i, j) <= r (inclusive), i != j."""
    if r <= 0:
        raise ConfigError(f"radio range must be positive, got {r}")
    xy = nodes if isinstance(nodes, np.ndarray) else positions(nodes)
    n = len(xy)
    # a slightly padded search radius; the exact test below decides
    pairs = cKDTree(xy).query_pairs(r * (1 + 1e-9) + 1e-12, output_type="ndarray")
    if len(pairs):
        d = xy[pairs[:, 0]] - xy[pairs[:, 1]]
        pairs = pairs[(d * d).sum(axis=1) <= r * r]
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j in pairs:
        nbrs[i].append(int(j))
        nbrs[j].append(int(i))
    return Graph([np.array(sorted(a), dtype=np.int64) for a in nbrs])


@dataclass(frozen=True)
class MonitoringArea:
    """A quadtree cell.

    ``frame`` is the unclipped square (x0, y0, width, height); ``rect`` is
    the frame clipped to the deployment square ``[0, side]^2``. The node
    estimate follows the unclipped frame, as a watchdog only knows the
    density and the frame it was handed.
    """

    frame: tuple[float, float, float, float]
    level: int
    estimated_count: float
    side: float

    @property
    def rect(self) -> tuple[float, float, float, float]:
        x0, y0, w, h = self.frame
        cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
        cx1, cy1 = min(x0 + w, self.side), min(y0 + h, self.side)
        return (cx0, cy0, max(cx1 - cx0, 0.0), max(cy1 - cy0, 0.0))

    @property
    def is_empty(self) -> bool:
        _, _, w, h = self.rect
        return w <= 0 or h <= 0

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Half-open membership mask; edges lying on the square's far side are closed."""
        x0, y0, w, h = self.rect
        x1, y1 = x0 + w, y0 + h
        x, y = xy[:, 0], xy[:, 1]
        in_x = (x >= x0) & ((x < x1) | ((x1 >= self.side) & (x <= x1)))
        in_y = (y >= y0) & ((y < y1) | ((y1 >= self.side) & (y <= y1)))
        return in_x & in_y

    def corners(self) -> list[tuple[float, float]]:
        x0, y0, w, h = self.rect
        return [(x0, y0), (x0 + w, y0), (x0, y0 + h), (x0 + w, y0 + h)]


def root_area(side: float, density: float, shift: tuple[float, float] = (0.0, 0.0)) -> MonitoringArea:
    """The level-2 area: the whole square, translated by ``shift``."""
    dx, dy = shift
    return MonitoringArea((dx, dy, side, side), 2, density * side * side, side)


def subdivide(area: MonitoringArea) -> list[MonitoringArea]:
    x0, y0, w, h = area.frame
    if w <= 0 or h <= 0:
        raise ValueError("cannot subdivide a degenerate area")
    hw, hh = w / 2, h / 2
    est = area.estimated_count / 4
    lvl = area.level + 1
    return [
        MonitoringArea((x0, y0, hw, hh), lvl, est, area.side),
        MonitoringArea((x0 + hw, y0, hw, hh), lvl, est, area.side),
        MonitoringArea((x0, y0 + hh, hw, hh), lvl, est, area.side),
        MonitoringArea((x0 + hw, y0 + hh, hw, hh), lvl, est, area.side),
    ]


def _xy(nodes) -> np.ndarray:
    return nodes if isinstance(nodes, np.ndarray) else positions(nodes)


def nodes_in(area: MonitoringArea, nodes) -> list[int]:
    xy = _xy(nodes)
    if len(xy) == 0 or area.is_empty:
        return []
    return np.flatnonzero(area.contains(xy)).tolist()


def corner_watchdogs(area: MonitoringArea, nodes, members: Sequence[int] | None = None) -> list[int]:
    """Nearest in-area node to each corner; ties to the smaller id; duplicates dropped."""
    xy = _xy(nodes)
    ids = np.sort(np.asarray(nodes_in(area, xy) if members is None else members, dtype=np.int64))
    if ids.size == 0:
        return []
    pts = xy[ids]
    chosen: list[int] = []
    for cx, cy in area.corners():
        d2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
        # ids are ascending, so argmin already prefers the smaller id on ties
        j = int(ids[int(np.argmin(d2))])
        if j not in chosen:
            chosen.append(j)
    return chosen


def export_nodes(nodes: Sequence[NodeRecord]) -> str:
    lines = ["# id x y is_adversary"]
    lines += [f"{nd.id} {nd.x:.6f} {nd.y:.6f} {int(nd.is_adversary)}" for nd in nodes]
    return "\n".join(lines) + "\n"


def export_adjacency(graph: Graph) -> str:
    lines = ["# id: neighbor ids"]
    for i, nbrs in enumerate(graph.adjacency):
        lines.append(f"{i}: " + " ".join(str(int(j)) for j in nbrs))
    return "\n".join(lines) + "\n"


@dataclass
class Deployment:
    """Placed nodes plus their unit-disk graph; read-only once built."""

    nodes: list[NodeRecord]
    graph: Graph
    side: float
    r: float

    def __post_init__(self):
        self.xy = positions(self.nodes)
        self.adversary_mask = np.array([nd.is_adversary for nd in self.nodes], dtype=bool)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def density(self) -> float:
        return self.n / (self.side * self.side)

    @property
    def adversary_ids(self) -> list[int]:
        return np.flatnonzero(self.adversary_mask).tolist()


def deploy(
    n: int,
    side: float,
    r: float,
    z0: int,
    rng: np.random.Generator,
    dist: str = "uniform",
    params: dict | None = None,
    require_connected: bool = False,
    max_tries: int = 1000,
) -> Deployment:
    """Place nodes, mark adversaries, build the graph.

    With ``require_connected`` the placement is redrawn from the same stream
    until the graph is connected.
    """
    if not 0 <= z0 <= n:
        raise ConfigError(f"adversary count z0={z0} outside [0, {n}]")
    for _ in range(max_tries):
        nodes = place_nodes(n, side, rng)
        graph = build_graph(nodes, r)
        if not require_connected or graph.is_connected():
            break
    else:
        raise ConfigError(f"no connected placement of n={n}, r={r} in {max_tries} tries")
    place_adversaries(nodes, z0, dist, params, rng)
    return Deployment(nodes, graph, side, r)
