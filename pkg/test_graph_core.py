import numpy as np
import pytest

from conftest import FIG1_EDGES
from errors import GraphError, MatrixMarketError
from graph_core import (Graph, SparseMatrix, closed_neighbors, gen_grid2d, gen_laplace3d,
                        graph_stats, load_problem, parse_generator_spec, parse_matrix_market,
                        pattern_symmetrize, read_matrix_market, write_matrix_market)

IDENTITY_2 = """%%MatrixMarket matrix coordinate real general
2 2 2
1 1 1.0
2 2 1.0
"""

TRIDIAGONAL_LOWER = """%%MatrixMarket matrix coordinate real symmetric
% lower triangle only
3 3 5
1 1 2.0
2 1 -1.0
2 2 2.0
3 2 -1.0
3 3 2.0
"""


def test_parse_identity():
    m = parse_matrix_market(IDENTITY_2.encode())
    assert m.row_offsets.tolist() == [0, 1, 2]
    assert m.col_indices.tolist() == [0, 1]
    assert m.values.tolist() == [1.0, 1.0]


def test_parse_symmetric_expands_lower_triangle():
    m = parse_matrix_market(TRIDIAGONAL_LOWER)
    assert m.nnz == 7
    expected = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    np.testing.assert_array_equal(m.toarray(), expected)


def test_parse_pattern_gets_unit_values(fixtures_dir):
    m = read_matrix_market(fixtures_dir / 'path5.mtx')
    assert m.num_rows == 5
    assert m.nnz == 8
    assert set(m.values.tolist()) == {1.0}


def test_parse_out_of_range_index_names_line():
    text = "%%MatrixMarket matrix coordinate real general\n3 3 1\n5 1 1.0\n"
    with pytest.raises(MatrixMarketError, match="line 3") as info:
        parse_matrix_market(text)
    assert info.value.line_no == 3


@pytest.mark.parametrize('text', [
    "",
    "%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n",
    "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
    "%%MatrixMarket matrix coordinate real general\n2 3 0\n",
    "not a header\n1 1 0\n",
])
def test_parse_rejects_malformed_files(text):
    with pytest.raises(MatrixMarketError):
        parse_matrix_market(text)


def test_duplicates_merge_or_conflict():
    same = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n1 1 1.0\n2 2 3.0\n"
    assert parse_matrix_market(same).nnz == 2

    conflicting = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n2 2 3.0\n1 1 2.0\n"
    with pytest.raises(MatrixMarketError, match="line 5"):
        parse_matrix_market(conflicting)


def test_matrix_market_round_trip():
    m = gen_laplace3d(3, 2, 2)
    again = parse_matrix_market(write_matrix_market(m))
    np.testing.assert_array_equal(again.row_offsets, m.row_offsets)
    np.testing.assert_array_equal(again.col_indices, m.col_indices)
    np.testing.assert_array_equal(again.values, m.values)


def test_round_trip_is_exact_for_awkward_floats():
    m = SparseMatrix.from_dense([[1.0 / 3.0, 0.1], [-2.0e-300, 12345.678901234567]])
    text = write_matrix_market(m)
    assert text.startswith('%%MatrixMarket matrix coordinate real general')
    np.testing.assert_array_equal(parse_matrix_market(text).values, m.values)


def test_invalid_utf8_names_line():
    data = b"%%MatrixMarket matrix coordinate real general\n% caf\xe9\n1 1 1\n1 1 1.0\n"
    with pytest.raises(MatrixMarketError, match="line 2") as info:
        parse_matrix_market(data)
    assert info.value.line_no == 2


def test_unreadable_size_line_names_line():
    text = "%%MatrixMarket matrix coordinate real general\n% note\nthree by three\n"
    with pytest.raises(MatrixMarketError) as info:
        parse_matrix_market(text)
    assert info.value.line_no == 3


def test_read_missing_file(tmp_path):
    with pytest.raises(MatrixMarketError, match="not found"):
        read_matrix_market(tmp_path / 'missing.mtx')


def test_pattern_symmetrize_closes_upper_triangle():
    m = SparseMatrix.from_dense([[0.0, 1.0], [0.0, 0.0]])
    g = pattern_symmetrize(m)
    assert g.neighbors(0).tolist() == [1]
    assert g.neighbors(1).tolist() == [0]


def test_pattern_symmetrize_drops_self_loops():
    m = SparseMatrix.from_dense(np.diag([1.0, 2.0, 3.0]) + np.eye(3, k=1))
    g = pattern_symmetrize(m, drop_diagonal=True)
    assert 2 not in g.neighbors(2).tolist()
    kept = pattern_symmetrize(m, drop_diagonal=False)
    assert 2 in kept.neighbors(2).tolist()


def test_pattern_symmetrize_tridiagonal_is_path(tridiagonal):
    g = pattern_symmetrize(tridiagonal)
    assert [g.neighbors(v).tolist() for v in range(3)] == [[1], [0, 2], [1]]


def test_pattern_symmetrize_random_matrices_are_valid_graphs():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(1, 40))
        dense = np.where(rng.random((n, n)) < 0.15, rng.random((n, n)), 0.0)
        g = pattern_symmetrize(SparseMatrix.from_dense(dense))
        assert g.is_symmetric()
        rows = np.repeat(np.arange(n), g.degrees())
        assert not np.any(rows == g.col_indices)


def test_graph_rejects_unsorted_rows():
    with pytest.raises(GraphError):
        Graph(2, np.array([0, 2, 2]), np.array([1, 0]))


def test_laplace3d_small_cases():
    np.testing.assert_array_equal(gen_laplace3d(1, 1, 1).toarray(), [[6.0]])
    np.testing.assert_array_equal(gen_laplace3d(2, 1, 1).toarray(), [[6.0, -1.0], [-1.0, 6.0]])


@pytest.mark.parametrize('n', [1, 2, 3, 5])
def test_laplace3d_entry_count(n):
    m = gen_laplace3d(n, n, n)
    assert m.nnz == 2 * 3 * n * n * (n - 1) + n ** 3
    np.testing.assert_array_equal(m.diagonal(), 6.0)


def test_grid2d_small_cases():
    np.testing.assert_array_equal(gen_grid2d(1, 1).toarray(), [[4.0]])
    expected = [[4.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 4.0]]
    np.testing.assert_array_equal(gen_grid2d(3, 1).toarray(), expected)
    g = pattern_symmetrize(gen_grid2d(2, 2))
    assert g.degrees().tolist() == [2, 2, 2, 2]


def test_generator_dimensions_must_be_positive():
    with pytest.raises(GraphError):
        gen_grid2d(0, 3)


@pytest.mark.slow
def test_laplace3d_100_average_degree():
    g = pattern_symmetrize(gen_laplace3d(100, 100, 100), drop_diagonal=False)
    stats = graph_stats(g)
    assert stats['num_vertices'] == 1_000_000
    assert stats['avg_degree'] == pytest.approx(6.94, abs=0.005)


def test_closed_neighbors(fig1_graph):
    assert closed_neighbors(Graph.empty(5), 3).tolist() == [3]
    path = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert closed_neighbors(path, 1).tolist() == [0, 1, 2]
    # vertex 4 of the walkthrough graph, 0-based 3
    assert (closed_neighbors(fig1_graph, 3) + 1).tolist() == [3, 4, 5, 6]
    with pytest.raises(GraphError):
        closed_neighbors(path, 3)


def test_from_edges_mirrors_and_deduplicates():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (0, 1), (2, 2)])
    assert g.num_edges == 1
    assert g.neighbors(2).tolist() == []


@pytest.mark.parametrize('spec, rows', [('laplace3d:2,3,4', 24), ('grid2d:5,1', 5), (' grid2d : 2, 2', 4)])
def test_parse_generator_spec(spec, rows):
    assert parse_generator_spec(spec).num_rows == rows


@pytest.mark.parametrize('spec', ['laplace3d:2,3', 'grid3d:1,1', 'grid2d:a,b', 'grid2d:0,1'])
def test_parse_generator_spec_rejects(spec):
    with pytest.raises(GraphError):
        parse_generator_spec(spec)


def test_load_problem_dispatches(fixtures_dir):
    assert load_problem('grid2d:2,2').num_rows == 4
    assert load_problem(str(fixtures_dir / 'diag10.mtx')).num_rows == 10


def test_graph_stats(fig1_graph):
    stats = graph_stats(fig1_graph)
    assert stats == {'num_vertices': 6, 'num_edges': len(FIG1_EDGES),
                     'avg_degree': pytest.approx(10 / 6), 'max_degree': 3}
