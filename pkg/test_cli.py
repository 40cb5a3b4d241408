import csv
import json
import math
from dataclasses import replace
from pathlib import Path

import pytest

import cli
from coarsen import aggregate_mis2, coarsen_basic, labels_to_csv
from conftest import roots_then_greedy
from errors import ConfigError
from graph_core import load_problem, pattern_symmetrize
from mis2 import Mis2Config
from settings import settings

SCHEMA = json.loads((Path(__file__).parent / 'report_schema.json').read_text(encoding='utf-8'))
VOLATILE = {'generated_at', 'threads', 'wall_time_ms'}


def run(tmp_path, *argv, name='report.json'):
    out = tmp_path / name
    code = cli.main([*argv, '--output', str(out), '--seed', '0'])
    return code, out


def load(path):
    return json.loads(path.read_text(encoding='utf-8'))


JSON_TYPES = {'string': str, 'integer': int, 'number': (int, float), 'boolean': bool,
              'array': list, 'object': dict}


def check_against(value, schema, where):
    """The subset of JSON Schema that report_schema.json uses"""
    if 'const' in schema:
        assert value == schema['const'], where
    if 'enum' in schema:
        assert value in schema['enum'], where
    if 'type' in schema:
        assert isinstance(value, JSON_TYPES[schema['type']]), where
        if schema['type'] in ('integer', 'number'):
            assert not isinstance(value, bool), where
    if 'minimum' in schema:
        assert value >= schema['minimum'], where
    if 'minItems' in schema:
        assert len(value) >= schema['minItems'], where
    if 'maxItems' in schema:
        assert len(value) <= schema['maxItems'], where
    for key in schema.get('required', []):
        assert key in value, f"{where}.{key}"
    for key, sub in schema.get('properties', {}).items():
        if key in value:
            check_against(value[key], sub, f"{where}.{key}")
    if 'items' in schema:
        for k, item in enumerate(value):
            check_against(item, schema['items'], f"{where}[{k}]")


def assert_finite(value, where='report'):
    if isinstance(value, float):
        assert math.isfinite(value), where
    elif isinstance(value, dict):
        for key, item in value.items():
            assert_finite(item, f"{where}.{key}")
    elif isinstance(value, list):
        for k, item in enumerate(value):
            assert_finite(item, f"{where}[{k}]")


def check_report(report, run_kind):
    check_against(report, SCHEMA, 'report')
    for k, record in enumerate(report['runs']):
        check_against(record, SCHEMA['$defs'][run_kind], f"report.runs[{k}]")
    assert_finite(report)


# ---------------------------------------------------------------------------
# mis2
# ---------------------------------------------------------------------------

def test_mis2_single_vertex_matches_golden(tmp_path, fixtures_dir):
    code, out = run(tmp_path, 'mis2', 'grid2d:1,1')
    assert code == cli.EXIT_OK
    report = load(out)
    golden = load(fixtures_dir / 'golden_mis2_grid2d_1_1.json')
    assert {k: v for k, v in report.items() if k not in VOLATILE | {'runs'}} == \
        {k: v for k, v in golden.items() if k != 'runs'}
    record = {k: v for k, v in report['runs'][0].items() if k not in VOLATILE}
    assert record == golden['runs'][0]
    check_report(report, 'mis2_run')


def test_mis2_on_matrix_market_file(tmp_path, fixtures_dir):
    code, out = run(tmp_path, 'mis2', str(fixtures_dir / 'path5.mtx'), '--scheme', 'fixed')
    assert code == cli.EXIT_OK
    record = load(out)['runs'][0]
    assert record['num_vertices'] == 5 and record['num_edges'] == 4
    assert record['scheme'] == 'fixed'
    assert record['verified'] is True
    assert record['set_size'] in (1, 2)


def test_missing_file_is_a_hard_error(tmp_path, capsys):
    code, out = run(tmp_path, 'mis2', str(tmp_path / 'missing.mtx'))
    assert code == cli.EXIT_ERROR
    assert not out.exists()
    assert 'ERROR' in capsys.readouterr().err


def test_bad_generator_spec_is_a_hard_error(tmp_path):
    code, _ = run(tmp_path, 'mis2', 'laplace3d:4,4')
    assert code == cli.EXIT_ERROR


def test_usage_errors_exit_with_one():
    assert cli.main([]) == cli.EXIT_ERROR
    assert cli.main(['mis2', 'grid2d:2,2', '--scheme', 'lcg']) == cli.EXIT_ERROR


def test_bad_environment_exits_with_one(monkeypatch, capsys):
    monkeypatch.setattr('cli.settings_error', ConfigError("MIS2_STATUS_BITS must be 32 or 64, got 48"))
    assert cli.main(['mis2', 'grid2d:2,2']) == cli.EXIT_ERROR
    assert 'MIS2_STATUS_BITS' in capsys.readouterr().err


@pytest.mark.slow
def test_mis2_laplace3d_50(tmp_path):
    code, out = run(tmp_path, 'mis2', 'laplace3d:50,50,50', '--scheme', 'xorstar')
    assert code == cli.EXIT_OK
    report = load(out)
    check_report(report, 'mis2_run')
    record = report['runs'][0]
    assert abs(record['set_size'] - 11469) <= 0.05 * 11469
    assert record['verified'] is True


def test_default_output_goes_to_report_dir(tmp_path, monkeypatch):
    monkeypatch.setattr('cli.settings', replace(settings, report_dir=str(tmp_path / 'reports')))
    assert cli.main(['mis2', 'grid2d:3,3', '--seed', '0']) == cli.EXIT_OK
    written = list((tmp_path / 'reports').glob('mis2_*.json'))
    assert len(written) == 1
    assert load(written[0])['command'] == 'mis2'


# ---------------------------------------------------------------------------
# coarsen
# ---------------------------------------------------------------------------

def test_coarsen_diagonal_gives_singletons(tmp_path, fixtures_dir):
    code, out = run(tmp_path, 'coarsen', str(fixtures_dir / 'diag10.mtx'))
    assert code == cli.EXIT_OK
    report = load(out)
    check_report(report, 'coarsen_run')
    record = report['runs'][0]
    assert record['num_aggregates'] == 10
    assert record['max_aggregate_size'] == 1
    assert record['unassigned'] == 0


@pytest.mark.parametrize('algorithm', ['basic', 'agg'])
def test_coarsen_writes_library_labels(tmp_path, fixtures_dir, algorithm):
    source = fixtures_dir / 'path5.mtx'
    code, out = run(tmp_path, 'coarsen', str(source), '--algorithm', algorithm)
    assert code == cli.EXIT_OK
    record = load(out)['runs'][0]
    assert record['aggregates_connected'] and record['roots_verified']
    csv_path = Path(record['labels_csv'])
    assert csv_path == tmp_path / 'report_labels.csv'

    g = pattern_symmetrize(load_problem(str(source)), drop_diagonal=True)
    if algorithm == 'agg':
        expected = labels_to_csv(aggregate_mis2(g, Mis2Config(seed=0)))
        assert csv_path.read_text(encoding='utf-8') == expected
    assert csv_path.read_text(encoding='utf-8').startswith('vertex,aggregate\n')


def test_coarsen_labels_for_fixed_roots(tmp_path, fixtures_dir, monkeypatch):
    injected = roots_then_greedy(5, [0, 3])
    monkeypatch.setattr('cli.coarsen_basic', lambda g, cfg: coarsen_basic(g, cfg, mis2_fn=injected))
    code, out = run(tmp_path, 'coarsen', str(fixtures_dir / 'path5.mtx'), '--algorithm', 'basic')
    assert code == cli.EXIT_OK
    record = load(out)['runs'][0]
    assert record['num_aggregates'] == 2
    labels = Path(record['labels_csv']).read_text(encoding='utf-8')
    assert labels == "vertex,aggregate\n0,0\n1,0\n2,1\n3,1\n4,1\n"


@pytest.mark.slow
def test_coarsen_laplace3d_30(tmp_path):
    code, out = run(tmp_path, 'coarsen', 'laplace3d:30,30,30', '--algorithm', 'agg')
    assert code == cli.EXIT_OK
    report = load(out)
    check_report(report, 'coarsen_run')
    record = report['runs'][0]
    assert record['unassigned'] == 0
    assert record['aggregates_connected'] is True
    assert record['roots_verified'] is True


# ---------------------------------------------------------------------------
# gs-bench
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('scheme', ['point', 'cluster'])
@pytest.mark.parametrize('solver', ['cg', 'gmres'])
def test_gs_bench_converges_on_small_laplacian(tmp_path, scheme, solver):
    code, out = run(tmp_path, 'gs-bench', 'laplace3d:6,6,6', '--scheme', scheme, '--solver', solver)
    assert code == cli.EXIT_OK
    report = load(out)
    check_report(report, 'gs_bench_run')
    record = report['runs'][0]
    assert record['converged'] is True
    assert record['failure'] is None
    assert len(record['residual_history']) == record['iterations'] + 1
    assert record['preconditioner_applications'] >= record['iterations']
    assert record['tol'] == cli.DEFAULT_TOL[solver]
    assert record['scheme'] == scheme
    assert record['algorithm'] == (None if scheme == 'point' else 'agg')


def test_gs_bench_singular_system_is_a_soft_failure(tmp_path, fixtures_dir):
    code, out = run(tmp_path, 'gs-bench', str(fixtures_dir / 'singular3.mtx'), '--max-iter', '100')
    assert code == cli.EXIT_SOFT_FAILURE
    record = load(out)['runs'][0]
    assert record['converged'] is False


def test_gs_bench_zero_diagonal_is_a_hard_error(tmp_path):
    matrix = tmp_path / 'zero_diag.mtx'
    matrix.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 1.0\n",
                      encoding='utf-8')
    code, _ = run(tmp_path, 'gs-bench', str(matrix))
    assert code == cli.EXIT_ERROR


@pytest.mark.slow
def test_gs_bench_laplace3d_32(tmp_path):
    iterations = {}
    for scheme in ('point', 'cluster'):
        code, out = run(tmp_path, 'gs-bench', 'laplace3d:32,32,32', '--scheme', scheme, name=f'{scheme}.json')
        assert code == cli.EXIT_OK
        iterations[scheme] = load(out)['runs'][0]['iterations']
    assert iterations['cluster'] <= iterations['point'] <= 800


# ---------------------------------------------------------------------------
# hash-study
# ---------------------------------------------------------------------------

def test_hash_study_needs_inputs(tmp_path):
    code, out = run(tmp_path, 'hash-study', name='study.csv')
    assert code == cli.EXIT_ERROR
    assert not out.exists()


def test_hash_study_rows(tmp_path, fixtures_dir):
    path5 = str(fixtures_dir / 'path5.mtx')
    code, out = run(tmp_path, 'hash-study', path5, path5, 'grid2d:4,4', name='study.csv')
    assert code == cli.EXIT_OK
    with out.open(encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        assert reader.fieldnames == cli.HASH_STUDY_FIELDS
        rows = list(reader)
    assert len(rows) == 3
    assert rows[0] == rows[1]
    assert rows[2]['num_vertices'] == '16'
    assert all(row['error'] == '' for row in rows)
    assert all(row['seed'] == '0' for row in rows)
    assert all(row['status_bits'] == str(settings.status_bits) for row in rows)
    assert all(row['xorshift_shifts'] == '13 7 17' for row in rows)
    assert all(row['xorshift_star_multiplier'] == '0x2545f4914f6cdd1d' for row in rows)
    assert all(int(row[f'{s}_iterations']) >= 1 for row in rows for s in ('fixed', 'xor', 'xorstar'))


def test_hash_study_records_failed_inputs(tmp_path):
    code, out = run(tmp_path, 'hash-study', 'grid2d:3,3', str(tmp_path / 'missing.mtx'), name='study.csv')
    assert code == cli.EXIT_SOFT_FAILURE
    with out.open(encoding='utf-8', newline='') as f:
        rows = list(csv.DictReader(f))
    assert rows[0]['error'] == ''
    assert rows[1]['error'] != ''


def test_hash_study_continues_past_undecodable_file(tmp_path):
    bad = tmp_path / 'bad.mtx'
    bad.write_bytes(b"%%MatrixMarket matrix coordinate real general\n% caf\xe9\n1 1 1\n1 1 1.0\n")
    code, out = run(tmp_path, 'hash-study', str(bad), 'grid2d:3,3', name='study.csv')
    assert code == cli.EXIT_SOFT_FAILURE
    with out.open(encoding='utf-8', newline='') as f:
        rows = list(csv.DictReader(f))
    assert 'line 2' in rows[0]['error']
    assert rows[1]['error'] == '' and rows[1]['num_vertices'] == '9'
