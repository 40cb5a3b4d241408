"""
MIS-2 driven coarsening.

coarsen_basic    roots and their neighbors form aggregates; every leftover
                 vertex joins the aggregate of its smallest-id aggregated neighbor.
aggregate_mis2   three phases: root aggregates, a second MIS-2 on the
                 unaggregated remainder (roots kept only with at least two free
                 neighbors), then leftovers join the most strongly coupled
                 tentative aggregate.

Each phase reads frozen labels from the previous phase and writes only the
label of the vertex it visits, so the labels do not depend on thread count.
"""

import csv
import io
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit, prange

from errors import CoarseningError
from graph_core import INDEX_DTYPE, Graph, graph_from_pairs
from mis2 import Mis2Config, mis2

logger = logging.getLogger(__name__)

UNASSIGNED = -1
MIN_PHASE2_NEIGHBORS = 2

Mis2Fn = Callable[[Graph], np.ndarray]


@dataclass(frozen=True)
class AggregateLabels:
    label: np.ndarray
    num_aggregates: int
    roots: np.ndarray
    phase2_roots: int = 0

    def is_complete(self):
        return not np.any(self.label == UNASSIGNED)

    @classmethod
    def identity(cls, n):
        ids = np.arange(n, dtype=INDEX_DTYPE)
        return cls(ids, n, ids.copy())


@njit(parallel=True, cache=True)
def _root_neighborhood_labels(offsets, cols, root_label, eligible):
    # label = aggregate of the single root in the closed neighborhood
    n = len(root_label)
    labels = np.full(n, -1, dtype=np.int64)
    clashes = np.zeros(n, dtype=np.bool_)
    for v in prange(n):
        if not eligible[v]:
            continue
        found = root_label[v]
        count = 1 if found >= 0 else 0
        for j in range(offsets[v], offsets[v + 1]):
            r = root_label[cols[j]]
            if r >= 0 and r != found:
                if found < 0:
                    found = r
                count += 1
        labels[v] = found
        clashes[v] = count > 1
    return labels, clashes


@njit(parallel=True, cache=True)
def _join_smallest_neighbor(offsets, cols, tentative):
    n = len(tentative)
    labels = tentative.copy()
    for v in prange(n):
        if tentative[v] >= 0:
            continue
        for j in range(offsets[v], offsets[v + 1]):
            a = tentative[cols[j]]
            if a >= 0:
                labels[v] = a
                break
    return labels


@njit(parallel=True, cache=True)
def _join_strongest_coupling(offsets, cols, tentative, sizes):
    n = len(tentative)
    labels = tentative.copy()
    for v in prange(n):
        if tentative[v] >= 0:
            continue
        best = -1
        best_coupling = 0
        best_size = 0
        for j in range(offsets[v], offsets[v + 1]):
            a = tentative[cols[j]]
            if a < 0 or a == best:
                continue
            coupling = 0
            for jj in range(offsets[v], offsets[v + 1]):
                if tentative[cols[jj]] == a:
                    coupling += 1
            size = sizes[a]
            if (best < 0 or coupling > best_coupling
                    or (coupling == best_coupling and size < best_size)
                    or (coupling == best_coupling and size == best_size and a < best)):
                best = a
                best_coupling = coupling
                best_size = size
        labels[v] = best
    return labels


def _default_mis2_fn(cfg):
    return lambda graph: mis2(graph, cfg).in_set


def induced_subgraph(g, mask):
    """
    Subgraph on the masked-in vertices, with edges whose endpoints are both kept.

    Returns:
        (subgraph, old_to_new, new_to_old); old_to_new is -1 for dropped vertices
    """
    mask = np.asarray(mask, dtype=bool)
    if len(mask) != g.num_vertices:
        raise CoarseningError(f"mask has length {len(mask)}, graph has {g.num_vertices} vertices")
    new_to_old = np.flatnonzero(mask).astype(INDEX_DTYPE)
    old_to_new = np.full(g.num_vertices, UNASSIGNED, dtype=INDEX_DTYPE)
    old_to_new[new_to_old] = np.arange(len(new_to_old), dtype=INDEX_DTYPE)

    rows = np.repeat(np.arange(g.num_vertices, dtype=INDEX_DTYPE), g.degrees())
    keep = mask[rows] & mask[g.col_indices]
    sub_rows = old_to_new[rows[keep]]
    sub_cols = old_to_new[g.col_indices[keep]]
    n = len(new_to_old)
    offsets = np.zeros(n + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(sub_rows, minlength=n), out=offsets[1:])
    return Graph(n, offsets, sub_cols), old_to_new, new_to_old


def _root_aggregates(g, roots, first_label=0, eligible=None):
    root_label = np.full(g.num_vertices, UNASSIGNED, dtype=np.int64)
    root_label[roots] = first_label + np.arange(len(roots))
    if eligible is None:
        eligible = np.ones(g.num_vertices, dtype=np.bool_)
    labels, clashes = _root_neighborhood_labels(g.row_offsets, g.col_indices, root_label, eligible)
    if np.any(clashes):
        v = int(np.flatnonzero(clashes)[0])
        raise CoarseningError(
            f"vertex {v} is adjacent to two roots; the root set is not distance-2 independent")
    return labels


def _finish(label, roots, phase2_roots=0):
    if np.any(label == UNASSIGNED):
        v = int(np.flatnonzero(label == UNASSIGNED)[0])
        raise CoarseningError(f"vertex {v} is unassigned after coarsening; the MIS-2 is not maximal")
    label.flags.writeable = False
    return AggregateLabels(label, len(roots), np.asarray(roots, dtype=INDEX_DTYPE), phase2_roots)


def coarsen_basic(g, cfg: Optional[Mis2Config] = None, mis2_fn: Optional[Mis2Fn] = None):
    """
    Basic MIS-2 coarsening: each MIS-2 vertex roots an aggregate with its
    neighbors, then every other vertex joins its smallest-id aggregated neighbor.

    Args:
        g: Graph
        cfg: Mis2Config for the MIS-2 computation
        mis2_fn: Optional replacement returning the root mask for a graph
    """
    mis2_fn = mis2_fn or _default_mis2_fn(cfg or Mis2Config())
    roots = np.flatnonzero(mis2_fn(g))
    tentative = _root_aggregates(g, roots)
    label = _join_smallest_neighbor(g.row_offsets, g.col_indices, tentative)
    result = _finish(label, roots)
    logger.info("basic coarsening: %d vertices -> %d aggregates", g.num_vertices, result.num_aggregates)
    return result


def aggregate_mis2(g, cfg: Optional[Mis2Config] = None, mis2_fn: Optional[Mis2Fn] = None):
    """
    Three-phase MIS-2 aggregation.

    Phase 1: MIS-2 roots aggregate with all their neighbors.
    Phase 2: MIS-2 of the subgraph induced by unaggregated vertices; a root
             with at least two unaggregated neighbors forms a new aggregate.
    Phase 3: with phase-2 labels frozen, each leftover vertex joins the
             adjacent aggregate with the largest coupling, then the smallest
             tentative size, then the smallest aggregate id.
    """
    mis2_fn = mis2_fn or _default_mis2_fn(cfg or Mis2Config())

    roots = np.flatnonzero(mis2_fn(g))
    tentative = _root_aggregates(g, roots)

    free = tentative == UNASSIGNED
    sub, _, new_to_old = induced_subgraph(g, free)
    sub_roots = np.flatnonzero(mis2_fn(sub)) if sub.num_vertices else np.zeros(0, dtype=INDEX_DTYPE)
    accepted = sub_roots[sub.degrees()[sub_roots] >= MIN_PHASE2_NEIGHBORS]
    sub_labels = _root_aggregates(sub, accepted, first_label=len(roots))
    assigned = sub_labels != UNASSIGNED
    tentative[new_to_old[assigned]] = sub_labels[assigned]
    all_roots = np.concatenate([roots, new_to_old[accepted]])
    logger.debug("aggregation: %d phase-1 roots, %d of %d phase-2 roots accepted",
                 len(roots), len(accepted), len(sub_roots))

    sizes = np.bincount(tentative[tentative >= 0], minlength=len(all_roots))
    label = _join_strongest_coupling(g.row_offsets, g.col_indices, tentative, sizes)
    result = _finish(label, all_roots, phase2_roots=len(accepted))
    logger.info("MIS-2 aggregation: %d vertices -> %d aggregates", g.num_vertices, result.num_aggregates)
    return result


def build_coarse_graph(g, labels):
    """Aggregates become vertices; a and b are adjacent iff some fine edge joins them"""
    if not labels.is_complete():
        raise CoarseningError("cannot build a coarse graph from incomplete labels")
    rows = np.repeat(np.arange(g.num_vertices, dtype=INDEX_DTYPE), g.degrees())
    return graph_from_pairs(labels.num_aggregates, labels.label[rows], labels.label[g.col_indices],
                            drop_diagonal=True)


def aggregate_sizes(labels):
    return np.bincount(labels.label, minlength=labels.num_aggregates)


def labels_to_csv(labels):
    """Two-column `vertex,aggregate` CSV with LF line endings"""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['vertex', 'aggregate'])
    writer.writerows(enumerate(labels.label.tolist()))
    return buf.getvalue()
