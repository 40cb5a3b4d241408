"""
Graph and matrix containers in compressed-sparse-row form, Matrix Market
reading and writing, and the structured test problems (7-point Laplace 3D,
5-point grid 2D).

All containers are immutable once built: their arrays are flagged read-only
and can be shared freely between threads.
"""

import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.io import mminfo, mmwrite

from errors import GraphError, MatrixMarketError

logger = logging.getLogger(__name__)

INDEX_DTYPE = np.int64
INDEX_MAX = np.iinfo(INDEX_DTYPE).max


def _frozen(array, dtype):
    out = np.ascontiguousarray(array, dtype=dtype)
    if out is array:
        out = out.copy()
    out.flags.writeable = False
    return out


def _check_csr(num_vertices, row_offsets, col_indices):
    if num_vertices < 0:
        raise GraphError(f"negative vertex count {num_vertices}")
    if row_offsets.shape != (num_vertices + 1,):
        raise GraphError(f"row_offsets has length {len(row_offsets)}, expected {num_vertices + 1}")
    if row_offsets[0] != 0:
        raise GraphError("row_offsets[0] must be 0")
    if np.any(np.diff(row_offsets) < 0):
        raise GraphError("row_offsets must be nondecreasing")
    if row_offsets[-1] != len(col_indices):
        raise GraphError(f"row_offsets[-1]={row_offsets[-1]} but {len(col_indices)} column indices")
    if len(col_indices) and (col_indices.min() < 0 or col_indices.max() >= num_vertices):
        raise GraphError("column index out of range")
    # strictly increasing inside every row
    if len(col_indices) > 1:
        steps = np.diff(col_indices)
        row_starts = np.zeros(len(col_indices), dtype=bool)
        row_starts[row_offsets[:-1][np.diff(row_offsets) > 0]] = True
        if np.any((steps <= 0) & ~row_starts[1:]):
            raise GraphError("column indices must be strictly increasing within each row")


def _offsets_from_rows(rows, n):
    counts = np.bincount(rows, minlength=n) if len(rows) else np.zeros(n, dtype=INDEX_DTYPE)
    offsets = np.zeros(n + 1, dtype=INDEX_DTYPE)
    np.cumsum(counts, out=offsets[1:])
    return offsets


@dataclass(frozen=True)
class Graph:
    """Undirected graph pattern: CSR with symmetric, sorted, duplicate-free rows"""
    num_vertices: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'row_offsets', _frozen(self.row_offsets, INDEX_DTYPE))
        object.__setattr__(self, 'col_indices', _frozen(self.col_indices, INDEX_DTYPE))
        _check_csr(self.num_vertices, self.row_offsets, self.col_indices)

    @classmethod
    def from_edges(cls, num_vertices, edges):
        """
        Build a graph from an edge list. Edges are mirrored and deduplicated;
        self-loops are dropped (MIS-2 code injects them at access time).
        """
        pairs = np.asarray(list(edges), dtype=INDEX_DTYPE).reshape(-1, 2)
        if len(pairs) and (pairs.min() < 0 or pairs.max() >= num_vertices):
            raise GraphError("edge endpoint out of range")
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        return graph_from_pairs(num_vertices, rows, cols, drop_diagonal=True)

    @classmethod
    def empty(cls, num_vertices):
        return cls(num_vertices, np.zeros(num_vertices + 1, dtype=INDEX_DTYPE),
                   np.zeros(0, dtype=INDEX_DTYPE))

    def neighbors(self, v):
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def degrees(self):
        return np.diff(self.row_offsets)

    @property
    def num_entries(self):
        return int(self.row_offsets[-1])

    @property
    def num_edges(self):
        """Undirected edge count; a self-loop counts once"""
        rows = np.repeat(np.arange(self.num_vertices), self.degrees())
        loops = int(np.count_nonzero(rows == self.col_indices))
        return (self.num_entries - loops) // 2 + loops

    def is_symmetric(self):
        rows = np.repeat(np.arange(self.num_vertices, dtype=INDEX_DTYPE), self.degrees())
        n = max(self.num_vertices, 1)
        forward = np.sort(rows * n + self.col_indices)
        backward = np.sort(self.col_indices * n + rows)
        return np.array_equal(forward, backward)

    def to_scipy(self):
        data = np.ones(self.num_entries, dtype=np.int32)
        return sp.csr_array((data, self.col_indices, self.row_offsets),
                            shape=(self.num_vertices, self.num_vertices))


@dataclass(frozen=True)
class SparseMatrix:
    """Square CSR matrix: a Graph-shaped structure plus one real value per entry"""
    num_rows: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'row_offsets', _frozen(self.row_offsets, INDEX_DTYPE))
        object.__setattr__(self, 'col_indices', _frozen(self.col_indices, INDEX_DTYPE))
        object.__setattr__(self, 'values', _frozen(self.values, np.float64))
        _check_csr(self.num_rows, self.row_offsets, self.col_indices)
        if self.values.shape != self.col_indices.shape:
            raise GraphError("values and col_indices differ in length")

    @classmethod
    def from_scipy(cls, matrix):
        csr = sp.csr_array(matrix)
        if csr.shape[0] != csr.shape[1]:
            raise GraphError(f"matrix must be square, got {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, dense):
        return cls.from_scipy(sp.csr_array(np.asarray(dense, dtype=np.float64)))

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    def row(self, i):
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def diagonal(self):
        diag = np.zeros(self.num_rows)
        rows = np.repeat(np.arange(self.num_rows), np.diff(self.row_offsets))
        on_diag = rows == self.col_indices
        diag[rows[on_diag]] = self.values[on_diag]
        return diag

    def to_scipy(self):
        return sp.csr_array((self.values, self.col_indices, self.row_offsets),
                            shape=(self.num_rows, self.num_rows))

    def toarray(self):
        return self.to_scipy().toarray()

    def matvec(self, x):
        return self.to_scipy() @ x


def graph_from_pairs(n, rows, cols, drop_diagonal):
    rows = np.asarray(rows, dtype=INDEX_DTYPE)
    cols = np.asarray(cols, dtype=INDEX_DTYPE)
    if drop_diagonal:
        keep = rows != cols
        rows, cols = rows[keep], cols[keep]
    keys = np.unique(rows * max(n, 1) + cols)
    rows, cols = np.divmod(keys, max(n, 1))
    return Graph(n, _offsets_from_rows(rows, n), cols)


def pattern_symmetrize(m, drop_diagonal=True):
    """
    Turn a matrix pattern into an undirected graph: union of the pattern and
    its transpose, rows sorted.

    Args:
        m: SparseMatrix
        drop_diagonal: Remove diagonal entries from the result
    """
    rows = np.repeat(np.arange(m.num_rows, dtype=INDEX_DTYPE), np.diff(m.row_offsets))
    all_rows = np.concatenate([rows, m.col_indices])
    all_cols = np.concatenate([m.col_indices, rows])
    return graph_from_pairs(m.num_rows, all_rows, all_cols, drop_diagonal)


def closed_neighbors(g, v):
    """Sorted union of {v} and the row of v; the adj(v) of every MIS-2 loop"""
    if not 0 <= v < g.num_vertices:
        raise GraphError(f"vertex {v} out of range for {g.num_vertices} vertices")
    return np.union1d(np.array([v], dtype=INDEX_DTYPE), g.neighbors(v))


# ---------------------------------------------------------------------------
# Structured generators
# ---------------------------------------------------------------------------

def _check_dims(*dims):
    for d in dims:
        if int(d) != d or d < 1:
            raise GraphError(f"grid dimensions must be positive integers, got {dims}")
    n = 1
    for d in dims:
        n *= int(d)
    # stencil rows hold at most 2*len(dims)+1 entries
    if n * (2 * len(dims) + 1) > INDEX_MAX:
        raise GraphError(f"grid {dims} overflows the index type")
    return n


def _stencil_matrix(dims, diagonal):
    n = _check_dims(*dims)
    ids = np.arange(n, dtype=INDEX_DTYPE)
    coords = np.unravel_index(ids, dims[::-1])[::-1]  # x varies fastest
    rows = [ids]
    cols = [ids]
    vals = [np.full(n, diagonal)]
    stride = 1
    for axis, extent in enumerate(dims):
        has_next = coords[axis] < extent - 1
        src = ids[has_next]
        for a, b in ((src, src + stride), (src + stride, src)):
            rows.append(a)
            cols.append(b)
            vals.append(np.full(len(a), -1.0))
        stride *= extent
    coo = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(n, n))
    return SparseMatrix.from_scipy(coo.tocsr())


def gen_laplace3d(nx, ny, nz):
    """7-point Laplacian on an nx*ny*nz grid: 6 on the diagonal, -1 per axis neighbor"""
    return _stencil_matrix((nx, ny, nz), 6.0)


def gen_grid2d(nx, ny):
    """5-point Laplacian on an nx*ny grid: 4 on the diagonal, -1 per axis neighbor"""
    return _stencil_matrix((nx, ny), 4.0)


_GENERATORS = {
    'laplace3d': (gen_laplace3d, 3),
    'grid2d': (gen_grid2d, 2),
}


def parse_generator_spec(text):
    """Build a matrix from `laplace3d:NX,NY,NZ` or `grid2d:NX,NY`"""
    match = re.fullmatch(r'\s*(\w+)\s*:\s*([\d\s,]+)', text)
    if not match or match.group(1) not in _GENERATORS:
        raise GraphError(f"unknown generator spec {text!r} (expected laplace3d:NX,NY,NZ or grid2d:NX,NY)")
    generator, arity = _GENERATORS[match.group(1)]
    try:
        dims = [int(part) for part in match.group(2).split(',')]
    except ValueError:
        raise GraphError(f"malformed dimensions in generator spec {text!r}")
    if len(dims) != arity:
        raise GraphError(f"{match.group(1)} takes {arity} dimensions, got {len(dims)}")
    return generator(*dims)


def is_generator_spec(text):
    return text.split(':', 1)[0].strip() in _GENERATORS


def graph_stats(g):
    """The summary-table columns: |V|, |E|, average and maximum degree"""
    degrees = g.degrees()
    return {
        'num_vertices': g.num_vertices,
        'num_edges': g.num_edges,
        'avg_degree': float(degrees.mean()) if g.num_vertices else 0.0,
        'max_degree': int(degrees.max()) if g.num_vertices else 0,
    }


# ---------------------------------------------------------------------------
# Matrix Market
# ---------------------------------------------------------------------------

_HEADER = re.compile(r'%%matrixmarket\s+matrix\s+(\w+)\s+(\w+)\s+(\w+)\s*$', re.IGNORECASE)


def _decode(data):
    if isinstance(data, str):
        return data
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        line_no = data.count(b'\n', 0, e.start) + 1
        raise MatrixMarketError(f"invalid UTF-8 byte 0x{data[e.start]:02x}", line_no)


def _size_line(lines):
    """1-based number of the first non-comment line after the header, or None"""
    for line_no, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if stripped and not stripped.startswith('%'):
            return line_no
    return None


def parse_matrix_market(text):
    """
    Parse a Matrix Market coordinate file (real or pattern, general or symmetric).

    Header and size line are read by scipy.io.mminfo; the body is scanned here
    so that every error names its line. Symmetric files are expanded to full
    storage, pattern entries get 1.0, identical duplicates are merged and
    conflicting duplicates are rejected.

    Args:
        text: File contents as bytes or str

    Returns:
        SparseMatrix with sorted, duplicate-free rows
    """
    text = _decode(text)
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    if not _HEADER.match(lines[0].strip()):
        raise MatrixMarketError("missing or malformed %%MatrixMarket header", 1)

    size_line = _size_line(lines)
    if size_line is None:
        raise MatrixMarketError("missing size line", len(lines))
    try:
        num_rows, num_cols, declared, layout, field, symmetry = mminfo(io.BytesIO(text.encode('utf-8')))
    except (ValueError, RuntimeError, OverflowError) as e:
        raise MatrixMarketError(f"unreadable header or size line: {e}", size_line)
    layout, field, symmetry = layout.lower(), field.lower(), symmetry.lower()
    if layout != 'coordinate':
        raise MatrixMarketError(f"only coordinate format is supported, got {layout!r}", 1)
    if field not in ('real', 'pattern'):
        raise MatrixMarketError(f"unsupported value type {field!r}", 1)
    if symmetry not in ('general', 'symmetric'):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", 1)
    if num_rows != num_cols:
        raise MatrixMarketError(f"matrix must be square, got {num_rows}x{num_cols}", size_line)

    line_no = size_line
    rows, cols, vals, where = [], [], [], []
    for line_no, line in enumerate(lines[size_line:], start=size_line + 1):
        stripped = line.strip()
        if not stripped or stripped.startswith('%'):
            continue
        parts = stripped.split()
        expected = 2 if field == 'pattern' else 3
        if len(parts) != expected:
            raise MatrixMarketError(f"expected {expected} fields, got {len(parts)}", line_no)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = 1.0 if field == 'pattern' else float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"malformed entry {stripped!r}", line_no)
        if not (1 <= i <= num_rows and 1 <= j <= num_cols):
            raise MatrixMarketError(f"index ({i}, {j}) outside a {num_rows}x{num_cols} matrix", line_no)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        where.append(line_no)
        if symmetry == 'symmetric' and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
            where.append(line_no)

    stored = len(where) if symmetry == 'general' else len(set(where))
    if stored != declared:
        raise MatrixMarketError(f"header declares {declared} entries, found {stored}", line_no)

    n = num_rows
    rows = np.asarray(rows, dtype=INDEX_DTYPE)
    cols = np.asarray(cols, dtype=INDEX_DTYPE)
    vals = np.asarray(vals, dtype=np.float64)
    where = np.asarray(where, dtype=INDEX_DTYPE)
    order = np.lexsort((where, cols, rows))
    rows, cols, vals, where = rows[order], cols[order], vals[order], where[order]

    same = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
    conflict = np.flatnonzero(same & (vals[1:] != vals[:-1]))
    if len(conflict):
        k = conflict[0]
        raise MatrixMarketError(
            f"duplicate entry ({rows[k] + 1}, {cols[k] + 1}) with conflicting values "
            f"{vals[k]!r} and {vals[k + 1]!r}", int(where[k + 1]))
    keep = np.concatenate([[True], ~same]) if len(rows) else np.zeros(0, dtype=bool)
    rows, cols, vals = rows[keep], cols[keep], vals[keep]

    logger.debug("parsed %dx%d matrix with %d stored entries", n, n, len(vals))
    return SparseMatrix(n, _offsets_from_rows(rows, n), cols, vals)


def write_matrix_market(m):
    """Serialize as coordinate/real/general; 17 significant digits round-trip every float"""
    buf = io.BytesIO()
    mmwrite(buf, m.to_scipy(), field='real', symmetry='general', precision=17)
    return buf.getvalue().decode('utf-8')


def read_matrix_market(path):
    path = Path(path)
    if not path.exists():
        raise MatrixMarketError(f"file not found: {path}")
    return parse_matrix_market(path.read_bytes())


def load_problem(source):
    """Resolve a CLI input: a generator spec or a path to a .mtx file"""
    if is_generator_spec(source):
        return parse_generator_spec(source)
    return read_matrix_market(source)
