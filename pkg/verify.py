"""
Brute-force oracles for distance-2 independence and maximality.

These are single-threaded and deliberately plain (Python integers used as
bitsets over the vertex set), so they can be trusted to check the parallel
kernels. They refuse graphs above the configured oracle cap; `check_mis2`
switches to the sparse counting check for those.
"""

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from errors import OracleTooLarge, SquareGraphTooLarge
from graph_core import Graph
from settings import settings

logger = logging.getLogger(__name__)


def _check_size(g, s=None):
    if g.num_vertices > settings.oracle_vertex_cap:
        raise OracleTooLarge(
            f"graph has {g.num_vertices} vertices; brute-force oracles stop at "
            f"{settings.oracle_vertex_cap} (MIS2_ORACLE_CAP)")
    if s is not None and len(s) != g.num_vertices:
        raise ValueError(f"vertex set has length {len(s)}, graph has {g.num_vertices} vertices")


def _closed_masks(g):
    masks = []
    for v in range(g.num_vertices):
        mask = 1 << v
        for w in g.neighbors(v).tolist():
            mask |= 1 << w
        masks.append(mask)
    return masks


def _two_hop_masks(g):
    """Bitset of every vertex within distance 2 of v (v included)"""
    closed = _closed_masks(g)
    reach = []
    for v in range(g.num_vertices):
        mask = closed[v]
        for w in g.neighbors(v).tolist():
            mask |= closed[w]
        reach.append(mask)
    return reach


def _as_mask(s):
    mask = 0
    for v in np.flatnonzero(np.asarray(s, dtype=bool)).tolist():
        mask |= 1 << v
    return mask


def is_distance2_independent(g, s):
    """True iff no two distinct members of s are joined by a path of length <= 2"""
    _check_size(g, s)
    members = _as_mask(s)
    reach = _two_hop_masks(g)
    for u in np.flatnonzero(np.asarray(s, dtype=bool)).tolist():
        if (reach[u] & members) != (1 << u):
            return False
    return True


def is_maximal_distance2(g, s):
    """True iff s is distance-2 independent and no vertex can be added to it"""
    if not is_distance2_independent(g, s):
        return False
    members = _as_mask(s)
    reach = _two_hop_masks(g)
    in_set = np.asarray(s, dtype=bool)
    for v in range(g.num_vertices):
        if not in_set[v] and (reach[v] & members) == 0:
            return False
    return True


def greedy_sequential_mis2(g):
    """Ascending-id greedy scan: take v unless a member already lies within distance 2"""
    _check_size(g)
    reach = _two_hop_masks(g)
    blocked = 0
    chosen = np.zeros(g.num_vertices, dtype=bool)
    for v in range(g.num_vertices):
        if not (blocked >> v) & 1:
            chosen[v] = True
            blocked |= reach[v]
    return chosen


def square_graph(g):
    """
    Pattern of G^2 with self-loops assumed on G: (u, v) is an edge iff a path
    of length <= 2 joins them. Self-loops are dropped from the result.
    """
    degrees = g.degrees()
    estimate = int(np.sum((degrees + 1) ** 2))
    if estimate > settings.square_max_entries:
        raise SquareGraphTooLarge(
            f"squared graph may hold up to {estimate} entries, over the "
            f"{settings.square_max_entries} limit (MIS2_SQUARE_MAX_ENTRIES)")
    closed = g.to_scipy() + sp.eye_array(g.num_vertices, dtype=np.int32, format='csr')
    squared = sp.csr_array(closed @ closed)
    squared.setdiag(0)
    squared.eliminate_zeros()
    squared.sort_indices()
    return Graph(g.num_vertices, squared.indptr, squared.indices)


def is_mis1(g, s):
    """Distance-1 maximal independence of s in g"""
    in_set = np.asarray(s, dtype=bool)
    if len(in_set) != g.num_vertices:
        return False
    rows = np.repeat(np.arange(g.num_vertices), g.degrees())
    cols = g.col_indices
    off_diagonal = rows != cols
    if np.any(in_set[rows] & in_set[cols] & off_diagonal):
        return False
    dominated = np.zeros(g.num_vertices, dtype=bool)
    dominated[rows[in_set[cols] & off_diagonal]] = True
    return bool(np.all(in_set | dominated))


def verify_via_squared(g, s):
    """s is an MIS-2 of g iff it is an MIS-1 of g squared"""
    return is_mis1(square_graph(g), s)


def _sparse_check(g, s):
    # two members within distance 2 share a closed neighborhood, and a vertex
    # can be added iff no closed neighbor sees a member in its own closed
    # neighborhood
    n = g.num_vertices
    if n == 0:
        return True
    closed = g.to_scipy() + sp.eye_array(n, dtype=np.int32, format="csr")
    closed.data[:] = 1
    counts = closed @ np.asarray(s, dtype=np.int32)
    if counts.max() > 1:
        return False
    reach = closed @ (counts > 0).astype(np.int32)
    return bool(np.all(reach > 0))


def check_mis2(g, s):
    """MIS-2 validity for any graph size: oracles under the cap, counting above it"""
    if g.num_vertices <= settings.oracle_vertex_cap:
        return is_maximal_distance2(g, s)
    logger.info("graph of %d vertices above oracle cap; using the sparse check", g.num_vertices)
    return _sparse_check(g, s)


def aggregates_connected(g, labels):
    """Every aggregate induces a connected subgraph"""
    label = np.asarray(labels.label)
    rows = np.repeat(np.arange(g.num_vertices), g.degrees())
    cols = g.col_indices
    inside = label[rows] == label[cols]
    adjacency = sp.csr_array((np.ones(int(inside.sum()), dtype=np.int8), (rows[inside], cols[inside])),
                             shape=(g.num_vertices, g.num_vertices))
    components, _ = connected_components(adjacency, directed=False)
    return components == labels.num_aggregates


def max_distance_to_root(g, labels):
    """Largest graph distance from a vertex to its aggregate's root; 3 means beyond two hops"""
    worst = 0
    for v in range(g.num_vertices):
        root = int(labels.roots[labels.label[v]])
        if root == v:
            continue
        near = g.neighbors(v)
        if _contains(near, root):
            worst = max(worst, 1)
        elif any(_contains(g.neighbors(w), root) for w in near.tolist()):
            worst = max(worst, 2)
        else:
            return 3
    return worst


def _contains(sorted_row, value):
    k = np.searchsorted(sorted_row, value)
    return k < len(sorted_row) and sorted_row[k] == value
