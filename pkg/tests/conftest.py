import numpy as np
import pytest

from spatialboot.fields import RateField
from spatialboot.graph import NeighborGraph, Region, RegionSet


def unit_square(x, y):
    """Closed unit-square ring with lower-left corner at (x, y)."""
    return [[(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1), (x, y)]]


def square_grid_polygons(rows, cols):
    """rows x cols unit squares keyed r{r}c{c}, as bare Polygon coordinates."""
    return {
        f"r{r}c{c}": unit_square(c, r) for r in range(rows) for c in range(cols)
    }


def path_graph(ids=("A", "B", "C")):
    """Path A - B - C ... with dummy centroids."""
    regions = RegionSet(
        Region(id=rid, lat=float(i), lon=0.0) for i, rid in enumerate(ids)
    )
    adjacency = {}
    for i, rid in enumerate(ids):
        nbrs = []
        if i > 0:
            nbrs.append(ids[i - 1])
        if i < len(ids) - 1:
            nbrs.append(ids[i + 1])
        adjacency[rid] = nbrs
    return NeighborGraph(regions, adjacency)


def ring_graph(n):
    """Cycle graph: every region has exactly two neighbors (regular)."""
    ids = [f"R{i:02d}" for i in range(n)]
    regions = RegionSet(
        Region(id=rid, lat=float(i % 10), lon=float(i // 10)) for i, rid in enumerate(ids)
    )
    adjacency = {
        ids[i]: [ids[(i - 1) % n], ids[(i + 1) % n]] for i in range(n)
    }
    return NeighborGraph(regions, adjacency)


def constant_field(graph, value=1.5, code="const"):
    return RateField(code, {rid: value for rid in graph.ids})


def random_graph(rng, n, edge_prob=0.2):
    """Random symmetric graph over n regions with at least one edge."""
    ids = [f"N{i:03d}" for i in range(n)]
    regions = RegionSet(
        Region(id=rid, lat=float(rng.uniform(-10, 10)), lon=float(rng.uniform(-10, 10)))
        for rid in ids
    )
    adjacency = {rid: set() for rid in ids}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                adjacency[ids[i]].add(ids[j])
                adjacency[ids[j]].add(ids[i])
    if not any(adjacency.values()):
        adjacency[ids[0]].add(ids[1])
        adjacency[ids[1]].add(ids[0])
    return NeighborGraph(regions, adjacency)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
