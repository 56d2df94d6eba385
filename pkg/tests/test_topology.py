import math

import numpy as np
import pytest

from dhaiq.topology import (
    ConfigError,
    MonitoringArea,
    NodeRecord,
    build_graph,
    corner_watchdogs,
    deploy,
    export_adjacency,
    export_nodes,
    nodes_in,
    place_adversaries,
    place_nodes,
    positions,
    root_area,
    subdivide,
)


def nodes_at(*points):
    return [NodeRecord(i, float(x), float(y)) for i, (x, y) in enumerate(points)]


def square(x0, y0, w, side=800.0, level=2, est=100.0):
    return MonitoringArea((x0, y0, w, w), level, est, side)


def test_place_nodes_in_square():
    nodes = place_nodes(1, 800, np.random.default_rng(0))
    assert len(nodes) == 1 and 0 <= nodes[0].x <= 800 and 0 <= nodes[0].y <= 800
    nodes = place_nodes(400, 800, np.random.default_rng(1))
    xy = positions(nodes)
    assert len(nodes) == 400 and xy.min() >= 0 and xy.max() <= 800
    assert [nd.id for nd in nodes] == list(range(400))


def test_place_nodes_mean_is_centre():
    xy = positions(place_nodes(100_000, 800, np.random.default_rng(2)))
    # std of the mean is 800/sqrt(12)/sqrt(1e5) ~ 0.73
    assert np.allclose(xy.mean(axis=0), 400, atol=4 * 0.74)


def test_place_nodes_deterministic():
    a = positions(place_nodes(50, 10, np.random.default_rng(3)))
    b = positions(place_nodes(50, 10, np.random.default_rng(3)))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("bad", [dict(n=0, side=1), dict(n=1, side=0)])
def test_place_nodes_rejects_bad_input(bad):
    with pytest.raises(ConfigError):
        place_nodes(rng=np.random.default_rng(0), **bad)


@pytest.mark.parametrize("n,z0", [(10, 0), (10, 10), (50, 7), (400, 45), (1, 1)])
@pytest.mark.parametrize("dist", ["uniform", "gaussian"])
def test_place_adversaries_marks_exactly_z0(n, z0, dist):
    nodes = place_nodes(n, 100, np.random.default_rng(n + z0))
    ids = place_adversaries(nodes, z0, dist, {"mean": (50, 50), "sigma": 12.5}, np.random.default_rng(1))
    assert len(ids) == len(set(ids)) == z0
    assert sum(nd.is_adversary for nd in nodes) == z0


def test_place_adversaries_too_many():
    with pytest.raises(ConfigError):
        place_adversaries(place_nodes(3, 1, np.random.default_rng(0)), 4)


def test_gaussian_collapses_to_nearest_nodes():
    nodes = place_nodes(200, 100, np.random.default_rng(4))
    mean = np.array([30.0, 70.0])
    ids = place_adversaries(nodes, 12, "gaussian", {"mean": mean, "sigma": 1e-12}, np.random.default_rng(5))
    d = np.linalg.norm(positions(nodes) - mean, axis=1)
    assert ids == sorted(np.argsort(d)[:12].tolist())


def test_graph_inclusive_range():
    g = build_graph(nodes_at((0, 0), (3, 4), (3 + 5.000001, 4)), 5.0)
    assert g.adjacency[0].tolist() == [1]
    assert g.adjacency[1].tolist() == [0]
    assert g.adjacency[2].tolist() == []


def test_graph_complete_at_diameter():
    nodes = place_nodes(30, 10, np.random.default_rng(6))
    g = build_graph(nodes, 10 * math.sqrt(2))
    assert all(len(a) == 29 for a in g.adjacency)


def test_graph_matches_distance_criterion_exhaustively():
    nodes = place_nodes(1000, 800, np.random.default_rng(7))
    xy = positions(nodes)
    g = build_graph(nodes, 50)
    d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
    expected = (d <= 50) & ~np.eye(1000, dtype=bool)
    got = np.zeros_like(expected)
    for i, nbrs in enumerate(g.adjacency):
        got[i, nbrs] = True
    assert np.array_equal(got, expected)
    assert np.array_equal(got, got.T)


def test_nodes_in_whole_square_and_empty_quadrant():
    nodes = nodes_at((10, 10), (20, 30), (5, 90))
    assert nodes_in(square(0, 0, 100, side=100), nodes) == [0, 1, 2]
    assert nodes_in(square(50, 50, 50, side=100), nodes) == []


def test_far_edges_of_square_are_closed():
    nodes = nodes_at((100, 100), (50, 50), (100, 0))
    quads = subdivide(square(0, 0, 100, side=100))
    assert nodes_in(quads[3], nodes) == [0, 1]
    assert nodes_in(quads[1], nodes) == [2]
    assert nodes_in(quads[0], nodes) == []


def test_quadrants_partition_node_list():
    rng = np.random.default_rng(8)
    nodes = place_nodes(500, 800, rng)
    for _ in range(50):
        x0, y0 = rng.uniform(-200, 700, 2)
        area = square(x0, y0, rng.uniform(10, 500))
        parent = nodes_in(area, nodes)
        children = [nodes_in(q, nodes) for q in subdivide(area)]
        flat = sorted(i for c in children for i in c)
        assert flat == parent
        assert len(flat) == len(set(flat))


def test_corner_watchdogs_single_node():
    assert corner_watchdogs(square(0, 0, 100, side=100), nodes_at((40, 60))) == [0]


def test_corner_watchdogs_one_per_corner():
    nodes = nodes_at((50, 50), (5, 5), (95, 3), (2, 97), (90, 90), (30, 70))
    area = square(0, 0, 100, side=100)
    got = corner_watchdogs(area, nodes)
    xy = positions(nodes)
    # oracle: brute-force nearest node per corner
    expected = []
    for c in area.corners():
        d = [math.dist(p, c) for p in xy]
        j = d.index(min(d))
        if j not in expected:
            expected.append(j)
    assert got == expected == [1, 2, 3, 4]


def test_corner_watchdogs_tie_goes_to_smaller_id():
    nodes = nodes_at((50, 50), (0, 10), (10, 0))
    got = corner_watchdogs(square(0, 0, 100, side=100), nodes)
    assert got[0] == 1


def test_corner_watchdogs_empty_area():
    assert corner_watchdogs(square(0, 0, 10, side=100), nodes_at((50, 50))) == []


def test_subdivide_geometry():
    unit = MonitoringArea((0.0, 0.0, 1.0, 1.0), 2, 50.0, 1.0)
    quads = subdivide(unit)
    assert [q.frame for q in quads] == [(0, 0, 0.5, 0.5), (0.5, 0, 0.5, 0.5), (0, 0.5, 0.5, 0.5), (0.5, 0.5, 0.5, 0.5)]
    assert all(q.level == 3 and q.estimated_count == 12.5 for q in quads)
    assert sum(q.frame[2] * q.frame[3] for q in quads) == 1.0


def test_shifted_root_is_clipped_but_keeps_estimate():
    root = root_area(800, 400 / 800**2, (25, 25))
    assert root.rect == (25, 25, 775, 775)
    assert root.estimated_count == 400
    corner = subdivide(subdivide(root)[3])[3]
    assert corner.frame == (625, 625, 200, 200) and corner.rect == (625, 625, 175, 175)
    assert MonitoringArea((800.0, 25.0, 25.0, 25.0), 7, 0.4, 800.0).is_empty


def test_deploy_connected():
    net = deploy(60, 100, 40, 3, np.random.default_rng(9), require_connected=True)
    assert net.graph.is_connected()
    assert len(net.adversary_ids) == 3
    with pytest.raises(ConfigError):
        deploy(60, 1000, 1, 0, np.random.default_rng(0), require_connected=True, max_tries=3)


def test_exports():
    nodes = nodes_at((1, 2), (3, 4))
    nodes[1].is_adversary = True
    text = export_nodes(nodes)
    assert text.splitlines()[1:] == ["0 1.000000 2.000000 0", "1 3.000000 4.000000 1"]
    adj = export_adjacency(build_graph(nodes, 5))
    assert adj.splitlines()[1:] == ["0: 1", "1: 0"]
