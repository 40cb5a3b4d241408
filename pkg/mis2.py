"""
Deterministic parallel distance-2 maximal independent set.

Every round refreshes the status word T_v of each undecided vertex with a
fresh hashed priority, takes the minimum status word over each vertex's
closed neighborhood (M_v), and then decides vertices whose whole closed
neighborhood agrees. Status words pack (priority, id) into one unsigned
integer with IN = 0 and OUT = all ones, so a single integer `min` replaces a
lexicographic tuple comparison.

The three phases are data-parallel numba loops that only write the slot of
the vertex being processed, so the result does not depend on the thread
count or the schedule.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from numba import njit, prange

from errors import Mis2Error, Mis2NotConverged, PackingError
from settings import settings

logger = logging.getLogger(__name__)

XORSHIFT_SHIFTS = (13, 7, 17)
XORSHIFT_STAR_MULTIPLIER = 0x2545F4914F6CDD1D
HASH_CONSTANTS = {
    'xorshift_shifts': list(XORSHIFT_SHIFTS),
    'xorshift_star_multiplier': hex(XORSHIFT_STAR_MULTIPLIER),
}

IN = 0
MIN_PRIORITY_BITS = 8

_MASK64 = (1 << 64) - 1
_S1 = np.uint64(XORSHIFT_SHIFTS[0])
_S2 = np.uint64(XORSHIFT_SHIFTS[1])
_S3 = np.uint64(XORSHIFT_SHIFTS[2])
_MULTIPLIER = np.uint64(XORSHIFT_STAR_MULTIPLIER)
_IN_WORD = np.uint64(0)
_NUM_CHUNKS = 256


class PriorityScheme(Enum):
    FIXED = 'fixed'
    XOR = 'xor'
    XOR_STAR = 'xorstar'

    @property
    def code(self):
        return _SCHEME_CODES[self]

    @classmethod
    def parse(cls, text):
        try:
            return cls(text.lower())
        except ValueError:
            choices = ', '.join(s.value for s in cls)
            raise Mis2Error(f"unknown priority scheme {text!r} (choose from {choices})")


_SCHEME_CODES = {PriorityScheme.FIXED: 0, PriorityScheme.XOR: 1, PriorityScheme.XOR_STAR: 2}


def out_word(width):
    return (1 << width) - 1


def id_bits(num_vertices):
    """b = ceil(log2(|V| + 2)), the smallest b with 2^b - 1 > |V|"""
    return (num_vertices + 1).bit_length()


def priority_bits(num_vertices, width=64):
    """Bits left for the priority once the id field is reserved"""
    b = id_bits(num_vertices)
    if b > width - MIN_PRIORITY_BITS:
        raise PackingError(
            f"{num_vertices} vertices need {b} id bits, leaving fewer than "
            f"{MIN_PRIORITY_BITS} priority bits in a {width}-bit status word")
    return width - b


def default_max_iterations(num_vertices):
    return 10 * id_bits(num_vertices) + 20


@dataclass(frozen=True)
class Mis2Config:
    scheme: PriorityScheme = PriorityScheme.XOR_STAR
    seed: int = field(default_factory=lambda: settings.seed)
    max_iterations: Optional[int] = None
    status_bits: int = field(default_factory=lambda: settings.status_bits)
    use_worklists: bool = True

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, 'scheme', PriorityScheme.parse(self.scheme))
        if self.max_iterations is not None and self.max_iterations < 1:
            raise Mis2Error(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.status_bits not in (32, 64):
            raise Mis2Error(f"status_bits must be 32 or 64, got {self.status_bits}")
        if not 0 <= self.seed <= _MASK64:
            raise Mis2Error(f"seed must fit in 64 bits, got {self.seed}")

    def iteration_limit(self, num_vertices):
        if self.max_iterations is not None:
            return self.max_iterations
        return default_max_iterations(num_vertices)


@dataclass
class Mis2Result:
    in_set: np.ndarray
    iterations: int
    worklist_sizes: list = field(default_factory=list)

    @property
    def size(self):
        return int(np.count_nonzero(self.in_set))

    def members(self):
        return np.flatnonzero(self.in_set)


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------

@njit(cache=True)
def _xorshift(x):
    x ^= x << _S1
    x ^= x >> _S2
    x ^= x << _S3
    return x


@njit(cache=True)
def _xorshift_star(x):
    return _xorshift(x) * _MULTIPLIER


@njit(cache=True)
def _hash(x, scheme):
    if scheme == 1:
        return _xorshift(x)
    return _xorshift_star(x)


@njit(cache=True)
def _priority_word(iteration, v, scheme, seed, shift):
    hv = _hash(np.uint64(v + 1), scheme)
    if scheme == 0:
        h = _hash(seed ^ hv, scheme)
    else:
        h = _hash(_hash(np.uint64(iteration + 1) ^ seed, scheme) ^ hv, scheme)
    return h >> shift


@njit(parallel=True, cache=True)
def _xorshift_star_many(xs):
    out = np.empty(len(xs), dtype=np.uint64)
    for i in prange(len(xs)):
        out[i] = _xorshift_star(xs[i])
    return out


def xorshift64(x):
    """Marsaglia xorshift with the (13, 7, 17) triple; 0 is a fixed point"""
    return int(_xorshift(np.uint64(x & _MASK64)))


def xorshift64star(x):
    """xorshift64 followed by multiplication with 0x2545F4914F6CDD1D mod 2^64"""
    return int(_xorshift_star(np.uint64(x & _MASK64)))


def xorshift64star_many(xs):
    return _xorshift_star_many(np.asarray(xs, dtype=np.uint64))


def priority(iteration, v, cfg, num_vertices):
    """
    Hashed priority of vertex v in a given iteration, truncated to the
    W - b bits available next to the id field.

    Fixed:        f(seed ^ f(v+1))               (same every iteration)
    Xor / Xor*:   f(f((iter+1) ^ seed) ^ f(v+1))
    """
    if not 0 <= v < num_vertices:
        raise Mis2Error(f"vertex {v} out of range for {num_vertices} vertices")
    shift = 64 - priority_bits(num_vertices, cfg.status_bits)
    word = _priority_word(np.int64(iteration), np.int64(v), cfg.scheme.code,
                          np.uint64(cfg.seed), np.uint64(shift))
    return int(word)


# ---------------------------------------------------------------------------
# Status word packing
# ---------------------------------------------------------------------------

def pack_tuple(priority_value, vertex, b, width=64):
    """(priority << b) | (id + 1); always strictly between IN and OUT"""
    assert 0 <= vertex < (1 << b) - 1, "id field too narrow"
    assert 0 <= priority_value < (1 << (width - b)), "priority wider than W - b bits"
    return (priority_value << b) | (vertex + 1)


def unpack_tuple(word, b):
    return word >> b, (word & ((1 << b) - 1)) - 1


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _hash_priorities(worklist, iteration, scheme, seed, shift):
    out = np.empty(len(worklist), dtype=np.uint64)
    for k in prange(len(worklist)):
        out[k] = _priority_word(iteration, worklist[k], scheme, seed, shift)
    return out


@njit(parallel=True, cache=True)
def _refresh_row(worklist, T, priorities, b, out):
    for k in prange(len(worklist)):
        v = worklist[k]
        if T[v] == _IN_WORD or T[v] == out:
            continue
        T[v] = (priorities[k] << b) | np.uint64(v + 1)


@njit(parallel=True, cache=True)
def _refresh_column(worklist, offsets, cols, T, M, out):
    for k in prange(len(worklist)):
        v = worklist[k]
        m = T[v]
        for j in range(offsets[v], offsets[v + 1]):
            t = T[cols[j]]
            if t < m:
                m = t
        if m == _IN_WORD:
            m = out
        M[v] = m


@njit(parallel=True, cache=True)
def _decide_set(worklist, offsets, cols, T, M, out):
    for k in prange(len(worklist)):
        v = worklist[k]
        tv = T[v]
        if tv == _IN_WORD or tv == out:
            continue
        mv = M[v]
        any_out = mv == out
        all_equal = mv == tv
        if not any_out:
            for j in range(offsets[v], offsets[v + 1]):
                mw = M[cols[j]]
                if mw == out:
                    any_out = True
                    break
                if mw != tv:
                    all_equal = False
        if any_out:
            T[v] = out
        elif all_equal:
            T[v] = _IN_WORD


@njit(parallel=True, cache=True)
def _flag_undecided(worklist, T, out):
    flags = np.empty(len(worklist), dtype=np.bool_)
    for k in prange(len(worklist)):
        t = T[worklist[k]]
        flags[k] = t != _IN_WORD and t != out
    return flags


@njit(parallel=True, cache=True)
def _flag_live_column(worklist, M, out):
    flags = np.empty(len(worklist), dtype=np.bool_)
    for k in prange(len(worklist)):
        flags[k] = M[worklist[k]] != out
    return flags


@njit(parallel=True, cache=True)
def _compact(items, flags):
    # blocked prefix sum over a fixed number of chunks: order-preserving and
    # independent of the thread count
    n = len(items)
    nchunks = _NUM_CHUNKS if n >= _NUM_CHUNKS else max(n, 1)
    chunk = (n + nchunks - 1) // nchunks
    offsets = np.zeros(nchunks + 1, dtype=np.int64)
    for c in prange(nchunks):
        lo = c * chunk
        hi = min(lo + chunk, n)
        count = 0
        for i in range(lo, hi):
            if flags[i]:
                count += 1
        offsets[c + 1] = count
    for c in range(nchunks):
        offsets[c + 1] += offsets[c]
    kept = np.empty(offsets[nchunks], dtype=np.int64)
    for c in prange(nchunks):
        lo = c * chunk
        hi = min(lo + chunk, n)
        pos = offsets[c]
        for i in range(lo, hi):
            if flags[i]:
                kept[pos] = items[i]
                pos += 1
    return kept


def compact_worklist(worklist, keep):
    """
    Keep the worklist entries whose per-vertex flag is set, preserving order.

    Args:
        worklist: Ascending vertex ids
        keep: Boolean array indexed by vertex id
    """
    worklist = np.asarray(worklist, dtype=np.int64)
    flags = np.asarray(keep, dtype=np.bool_)[worklist]
    return _compact(worklist, flags)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

PriorityOverride = Callable[[int, np.ndarray], np.ndarray]


def mis2(g, cfg=None, priority_override: Optional[PriorityOverride] = None):
    """
    Compute a distance-2 maximal independent set of g.

    Args:
        g: Graph (symmetric CSR, closed neighborhoods are implied)
        cfg: Mis2Config; defaults to Xor* hashing with the configured seed
        priority_override: Test hook returning the priorities of the worklist
            vertices for a given iteration, instead of hashing them

    Returns:
        Mis2Result with the membership mask and the iteration count

    Raises:
        Mis2NotConverged: after cfg.max_iterations rounds with undecided
            vertices left; the partial state is attached
    """
    cfg = cfg or Mis2Config()
    n = g.num_vertices
    width = cfg.status_bits
    pbits = priority_bits(n, width)
    b = np.uint64(id_bits(n))
    shift = np.uint64(64 - pbits)
    out = np.uint64(out_word(width))
    seed = np.uint64(cfg.seed)
    limit = cfg.iteration_limit(n)
    offsets, cols = g.row_offsets, g.col_indices

    T = np.ones(n, dtype=np.uint64)
    M = np.full(n, out, dtype=np.uint64)
    all_vertices = np.arange(n, dtype=np.int64)
    worklist1 = all_vertices
    worklist2 = all_vertices
    undecided = n
    iteration = 0
    sizes = []

    while undecided > 0:
        if iteration >= limit:
            partial = Mis2Result(T == _IN_WORD, iteration, sizes)
            raise Mis2NotConverged(
                f"{undecided} vertices still undecided after {iteration} iterations", partial)
        sizes.append(undecided)

        if priority_override is not None:
            priorities = np.asarray(priority_override(iteration, worklist1), dtype=np.uint64)
            if len(priorities) and int(priorities.max()) >= (1 << pbits):
                raise PackingError(f"override priority does not fit in {pbits} bits")
        else:
            priorities = _hash_priorities(worklist1, np.int64(iteration), cfg.scheme.code, seed, shift)

        _refresh_row(worklist1, T, priorities, b, out)
        _refresh_column(worklist2, offsets, cols, T, M, out)
        _decide_set(worklist1, offsets, cols, T, M, out)

        if cfg.use_worklists:
            worklist1 = _compact(worklist1, _flag_undecided(worklist1, T, out))
            worklist2 = _compact(worklist2, _flag_live_column(worklist2, M, out))
            undecided = len(worklist1)
        else:
            undecided = int(np.count_nonzero(_flag_undecided(all_vertices, T, out)))
        iteration += 1
        logger.debug("iteration %d: %d undecided, %d live columns",
                     iteration, undecided, len(worklist2))

    in_set = T == _IN_WORD
    logger.info("MIS-2 of %d vertices: %d members in %d iterations (%s)",
                n, int(np.count_nonzero(in_set)), iteration, cfg.scheme.value)
    return Mis2Result(in_set, iteration, sizes)
