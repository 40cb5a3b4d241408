"""
Multicolor Gauss-Seidel on clusters of rows.

Setup coarsens the matrix graph (or keeps every row as its own cluster for
point multicolor GS), colors the coarse graph greedily and lays the rows out
color by color. A sweep walks the colors in order; clusters of one color run
in parallel and the rows inside a cluster are relaxed one after another, so a
single all-rows cluster reproduces classical Gauss-Seidel exactly.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from numba import njit, prange

from coarsen import AggregateLabels, aggregate_mis2, build_coarse_graph, coarsen_basic
from errors import GaussSeidelSetupError, Mis2Error
from graph_core import INDEX_DTYPE, pattern_symmetrize
from mis2 import Mis2Config

logger = logging.getLogger(__name__)


class ClusterScheme(Enum):
    POINT = 'point'
    BASIC_COARSEN = 'basic'
    MIS2_AGG = 'agg'

    @classmethod
    def parse(cls, text):
        try:
            return cls(text.lower())
        except ValueError:
            raise Mis2Error(f"unknown clustering scheme {text!r} (choose from point, basic, agg)")


class Direction(Enum):
    FORWARD = 'forward'
    BACKWARD = 'backward'


@dataclass(frozen=True)
class Coloring:
    color: np.ndarray
    num_colors: int
    color_sets: list


@dataclass(frozen=True)
class ClusterGSPrecond:
    """Reusable setup; valid as long as the matrix structure does not change"""
    labels: AggregateLabels
    coarse_coloring: Coloring
    cluster_offsets: np.ndarray
    cluster_members: np.ndarray
    color_offsets: np.ndarray
    color_clusters: np.ndarray
    inv_diag: np.ndarray

    @property
    def num_clusters(self):
        return self.labels.num_aggregates

    @property
    def num_colors(self):
        return self.coarse_coloring.num_colors

    def cluster_rows(self, cluster):
        return self.cluster_members[self.cluster_offsets[cluster]:self.cluster_offsets[cluster + 1]]


@njit(cache=True)
def _greedy_color(offsets, cols, n):
    color = np.full(n, -1, dtype=np.int64)
    used_by = np.full(n + 1, -1, dtype=np.int64)
    for v in range(n):
        for j in range(offsets[v], offsets[v + 1]):
            c = color[cols[j]]
            if c >= 0:
                used_by[c] = v
        c = 0
        while used_by[c] == v:
            c += 1
        color[v] = c
    return color


def _group_by(keys, num_groups):
    """Stable grouping: returns (offsets, members) with members ascending per group"""
    members = np.argsort(keys, kind='stable').astype(INDEX_DTYPE)
    offsets = np.zeros(num_groups + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(keys, minlength=num_groups), out=offsets[1:])
    return offsets, members


def greedy_color(g):
    """Visit vertices by ascending id and give each the smallest color its colored neighbors leave free"""
    color = _greedy_color(g.row_offsets, g.col_indices, g.num_vertices)
    num_colors = int(color.max()) + 1 if g.num_vertices else 0
    offsets, members = _group_by(color, num_colors)
    color_sets = [members[offsets[c]:offsets[c + 1]] for c in range(num_colors)]
    return Coloring(color, num_colors, color_sets)


def _inverse_diagonal(a):
    rows = np.repeat(np.arange(a.num_rows, dtype=INDEX_DTYPE), np.diff(a.row_offsets))
    on_diag = rows == a.col_indices
    present = np.zeros(a.num_rows, dtype=bool)
    present[rows[on_diag]] = True
    if not np.all(present):
        row = int(np.flatnonzero(~present)[0])
        raise GaussSeidelSetupError(f"row {row} has no diagonal entry", row)
    diag = a.diagonal()
    if np.any(diag == 0.0):
        row = int(np.flatnonzero(diag == 0.0)[0])
        raise GaussSeidelSetupError(f"row {row} has a zero diagonal entry", row)
    inv_diag = 1.0 / diag
    if not np.all(np.isfinite(inv_diag)):
        row = int(np.flatnonzero(~np.isfinite(inv_diag))[0])
        raise GaussSeidelSetupError(f"row {row} has a non-finite inverse diagonal", row)
    return inv_diag


def _assemble(a, graph, labels, inv_diag):
    coarse = build_coarse_graph(graph, labels)
    coloring = greedy_color(coarse)

    # same-color clusters must not share a fine edge
    rows = np.repeat(np.arange(graph.num_vertices, dtype=INDEX_DTYPE), graph.degrees())
    lu, lv = labels.label[rows], labels.label[graph.col_indices]
    clash = (lu != lv) & (coloring.color[lu] == coloring.color[lv])
    if np.any(clash):
        k = int(np.flatnonzero(clash)[0])
        raise GaussSeidelSetupError(
            f"clusters {lu[k]} and {lv[k]} share color {coloring.color[lu[k]]} but are coupled", int(rows[k]))

    cluster_offsets, cluster_members = _group_by(labels.label, labels.num_aggregates)
    color_offsets, color_clusters = _group_by(coloring.color, coloring.num_colors)
    logger.info("cluster GS setup: %d rows, %d clusters, %d colors",
                a.num_rows, labels.num_aggregates, coloring.num_colors)
    return ClusterGSPrecond(labels, coloring, cluster_offsets, cluster_members,
                            color_offsets, color_clusters, inv_diag)


def cluster_gs_from_labels(a, labels):
    """Setup from an explicit clustering of the rows"""
    if labels.label.shape != (a.num_rows,) or not labels.is_complete():
        raise GaussSeidelSetupError("labels must assign every row of the matrix")
    inv_diag = _inverse_diagonal(a)
    return _assemble(a, pattern_symmetrize(a, drop_diagonal=True), labels, inv_diag)


def cluster_gs_setup(a, scheme=ClusterScheme.MIS2_AGG, cfg: Optional[Mis2Config] = None):
    """
    Build the cluster multicolor Gauss-Seidel setup.

    Args:
        a: Square SparseMatrix with a nonzero diagonal in every row
        scheme: POINT (every row its own cluster), BASIC_COARSEN or MIS2_AGG
        cfg: Mis2Config used by the coarsening

    Raises:
        GaussSeidelSetupError: missing or zero diagonal, naming the row
    """
    if isinstance(scheme, str):
        scheme = ClusterScheme.parse(scheme)
    inv_diag = _inverse_diagonal(a)
    graph = pattern_symmetrize(a, drop_diagonal=True)
    if scheme is ClusterScheme.POINT:
        labels = AggregateLabels.identity(a.num_rows)
    elif scheme is ClusterScheme.BASIC_COARSEN:
        labels = coarsen_basic(graph, cfg)
    else:
        labels = aggregate_mis2(graph, cfg)
    return _assemble(a, graph, labels, inv_diag)


@njit(parallel=True, cache=True)
def _sweep(offsets, cols, vals, inv_diag, color_offsets, color_clusters,
           cluster_offsets, cluster_members, x, b, forward):
    num_colors = len(color_offsets) - 1
    for step in range(num_colors):
        c = step if forward else num_colors - 1 - step
        for k in prange(color_offsets[c], color_offsets[c + 1]):
            cluster = color_clusters[k]
            lo = cluster_offsets[cluster]
            hi = cluster_offsets[cluster + 1]
            for t in range(hi - lo):
                i = cluster_members[lo + t] if forward else cluster_members[hi - 1 - t]
                r = b[i]
                for j in range(offsets[i], offsets[i + 1]):
                    r -= vals[j] * x[cols[j]]
                x[i] += r * inv_diag[i]


def _run_sweep(p, a, x, b, forward):
    _sweep(a.row_offsets, a.col_indices, a.values, p.inv_diag, p.color_offsets, p.color_clusters,
           p.cluster_offsets, p.cluster_members, x, b, forward)


def _check_dims(p, a, *vectors):
    for v in vectors:
        if v.shape != (a.num_rows,) or p.inv_diag.shape != (a.num_rows,):
            raise GaussSeidelSetupError(
                f"dimension mismatch: matrix has {a.num_rows} rows, vector has shape {v.shape}")


def gs_sweep(p, a, x, b, direction=Direction.FORWARD):
    """
    One Gauss-Seidel sweep x_i <- x_i + (b_i - A_i x) / A_ii.

    Forward visits colors ascending and rows ascending within each cluster;
    backward reverses both.

    Returns:
        The updated iterate (a new array; x is left untouched)
    """
    x = np.array(x, dtype=np.float64, copy=True)
    b = np.ascontiguousarray(b, dtype=np.float64)
    _check_dims(p, a, x, b)
    _run_sweep(p, a, x, b, direction is Direction.FORWARD)
    return x


def sgs_apply(p, a, b, sweeps=1):
    """Symmetric sweeps (forward then backward) from x = 0: the preconditioner M^-1 b"""
    if sweeps < 1:
        raise Mis2Error(f"sweeps must be >= 1, got {sweeps}")
    b = np.ascontiguousarray(b, dtype=np.float64)
    x = np.zeros(a.num_rows)
    _check_dims(p, a, b)
    for _ in range(sweeps):
        _run_sweep(p, a, x, b, True)
        _run_sweep(p, a, x, b, False)
    return x


class SgsPreconditioner:
    """Callable M^-1 handed to the Krylov drivers"""

    def __init__(self, precond, a, sweeps=1):
        self.precond = precond
        self.a = a
        self.sweeps = sweeps

    def __call__(self, r):
        return sgs_apply(self.precond, self.a, r, self.sweeps)


def point_multicolor_sweep(a, coloring, x, b, direction=Direction.FORWARD):
    """Straightforward point multicolor GS, row by row over each color set"""
    x = np.array(x, dtype=np.float64, copy=True)
    inv_diag = 1.0 / a.diagonal()
    colors = range(coloring.num_colors)
    if direction is Direction.BACKWARD:
        colors = reversed(colors)
    for c in colors:
        for i in coloring.color_sets[c].tolist():
            cols, vals = a.row(i)
            r = b[i]
            for j, v in zip(cols.tolist(), vals.tolist()):
                r -= v * x[j]
            x[i] += r * inv_diag[i]
    return x
