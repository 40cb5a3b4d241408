"""
Command-line front end.

    python cli.py mis2 laplace3d:50,50,50 --scheme xorstar
    python cli.py coarsen matrix.mtx --algorithm agg
    python cli.py gs-bench laplace3d:32,32,32 --scheme cluster --solver gmres --tol 1e-8
    python cli.py hash-study laplace3d:100,100,100 grid2d:300,300

Exit codes: 0 success (and verified), 1 hard error, 2 soft failure
(verification failed or the solver did not converge).
"""

import argparse
import csv
import json
import logging
import sys
import time
from datetime import datetime
from pathlib import Path

import numpy as np

from coarsen import aggregate_mis2, aggregate_sizes, coarsen_basic, labels_to_csv
from errors import Mis2Error, SolverFailure
from gauss_seidel import ClusterScheme, SgsPreconditioner, cluster_gs_setup
from graph_core import graph_stats, load_problem, pattern_symmetrize
from mis2 import HASH_CONSTANTS, Mis2Config, PriorityScheme, mis2
from settings import apply_threads, settings, settings_error
from solver import DEFAULT_RESTART, deterministic_rhs, gmres, pcg
from verify import aggregates_connected, check_mis2

logger = logging.getLogger(__name__)

TOOL_NAME = 'mis2-toolkit'
TOOL_VERSION = '0.1.0'
SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SOFT_FAILURE = 2

DEFAULT_TOL = {'cg': 1e-12, 'gmres': 1e-8}
DEFAULT_MAX_ITER = {'cg': 1000, 'gmres': 800}

HASH_STUDY_FIELDS = ['input', 'seed', 'status_bits', 'xorshift_shifts', 'xorshift_star_multiplier',
                     'num_vertices', 'num_edges',
                     'fixed_iterations', 'xor_iterations', 'xorstar_iterations',
                     'fixed_size', 'xor_size', 'xorstar_size', 'error']


class UsageError(Mis2Error):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here 2 means soft failure"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _timestamp():
    return datetime.now().strftime('%Y%m%d_%H%M%S')


def default_output_path(command, suffix='.json'):
    return Path(settings.report_dir) / f"{command.replace('-', '_')}_{_timestamp()}{suffix}"


def _metadata(command, seed, threads):
    return {
        'schema_version': SCHEMA_VERSION,
        'tool': TOOL_NAME,
        'tool_version': TOOL_VERSION,
        'command': command,
        'generated_at': _timestamp(),
        'hash_constants': HASH_CONSTANTS,
        'seed': seed,
        'threads': threads,
        'status_bits': settings.status_bits,
    }


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as f:
        json.dump(report, f, indent=2, allow_nan=False)
        f.write('\n')
    return path


def _elapsed_ms(start):
    return (time.perf_counter() - start) * 1000.0


def _banner(title):
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)


def _status(ok, message):
    print(f"{'✓' if ok else '⚠'} {message}")


def _load_graph(source):
    matrix = load_problem(source)
    return matrix, pattern_symmetrize(matrix, drop_diagonal=True)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_mis2(args):
    _banner(f"MIS-2: {args.input}")
    _, g = _load_graph(args.input)
    cfg = Mis2Config(scheme=PriorityScheme.parse(args.scheme), seed=args.seed)

    start = time.perf_counter()
    result = mis2(g, cfg)
    wall_ms = _elapsed_ms(start)
    verified = check_mis2(g, result.in_set)

    stats = graph_stats(g)
    record = {
        'graph': args.input,
        **stats,
        'kernel': 'mis2',
        'scheme': cfg.scheme.value,
        'iterations': result.iterations,
        'set_size': result.size,
        'mis2_fraction': result.size / g.num_vertices if g.num_vertices else 0.0,
        'worklist_sizes': result.worklist_sizes,
        'verified': verified,
        'wall_time_ms': wall_ms,
    }
    report = {**_metadata('mis2', cfg.seed, args.threads_used), 'runs': [record]}
    path = write_report(report, args.output or default_output_path('mis2'))

    print(f"\n|V| = {stats['num_vertices']}, |E| = {stats['num_edges']}, "
          f"average degree {stats['avg_degree']:.2f}")
    print(f"Set size: {result.size} after {result.iterations} iterations ({cfg.scheme.value})")
    _status(verified, "distance-2 maximal independent set" if verified else "verification FAILED")
    print(f"Report saved to: {path}")
    return EXIT_OK if verified else EXIT_SOFT_FAILURE


def cmd_coarsen(args):
    _banner(f"COARSEN ({args.algorithm}): {args.input}")
    _, g = _load_graph(args.input)
    cfg = Mis2Config(scheme=PriorityScheme.parse(args.scheme), seed=args.seed)
    coarsen = aggregate_mis2 if args.algorithm == 'agg' else coarsen_basic

    start = time.perf_counter()
    labels = coarsen(g, cfg)
    wall_ms = _elapsed_ms(start)

    sizes = aggregate_sizes(labels)
    unassigned = int(np.count_nonzero(labels.label < 0))
    connected = aggregates_connected(g, labels)
    first_phase = np.zeros(g.num_vertices, dtype=bool)
    first_phase[labels.roots[:labels.num_aggregates - labels.phase2_roots]] = True
    roots_verified = check_mis2(g, first_phase)

    report_path = Path(args.output) if args.output else default_output_path('coarsen')
    csv_path = report_path.with_name(report_path.stem + '_labels.csv')
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(labels_to_csv(labels), encoding='utf-8', newline='\n')

    record = {
        'graph': args.input,
        **graph_stats(g),
        'kernel': f'coarsen-{args.algorithm}',
        'scheme': cfg.scheme.value,
        'num_aggregates': labels.num_aggregates,
        'phase2_roots': labels.phase2_roots,
        'min_aggregate_size': int(sizes.min()) if len(sizes) else 0,
        'mean_aggregate_size': float(sizes.mean()) if len(sizes) else 0.0,
        'max_aggregate_size': int(sizes.max()) if len(sizes) else 0,
        'unassigned': unassigned,
        'aggregates_connected': connected,
        'roots_verified': roots_verified,
        'labels_csv': str(csv_path),
        'wall_time_ms': wall_ms,
    }
    report = {**_metadata('coarsen', cfg.seed, args.threads_used), 'runs': [record]}
    write_report(report, report_path)

    ok = unassigned == 0 and connected and roots_verified
    print(f"\n{g.num_vertices} vertices -> {labels.num_aggregates} aggregates "
          f"(sizes {record['min_aggregate_size']}..{record['max_aggregate_size']})")
    _status(ok, "all vertices aggregated, aggregates connected" if ok else "structural checks FAILED")
    print(f"Report saved to: {report_path}")
    print(f"Labels saved to: {csv_path}")
    return EXIT_OK if ok else EXIT_SOFT_FAILURE


class _TimedPreconditioner:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.elapsed_ms = 0.0

    def __call__(self, r):
        start = time.perf_counter()
        z = self.inner(r)
        self.elapsed_ms += _elapsed_ms(start)
        self.calls += 1
        return z


def cmd_gs_bench(args):
    _banner(f"GAUSS-SEIDEL BENCH ({args.scheme}, {args.solver}): {args.input}")
    a = load_problem(args.input)
    if args.scheme == 'point':
        scheme = ClusterScheme.POINT
    else:
        scheme = ClusterScheme.MIS2_AGG if args.algorithm == 'agg' else ClusterScheme.BASIC_COARSEN
    cfg = Mis2Config(seed=args.seed)
    tol = args.tol if args.tol is not None else DEFAULT_TOL[args.solver]
    max_iter = args.max_iter if args.max_iter is not None else DEFAULT_MAX_ITER[args.solver]

    start = time.perf_counter()
    precond = cluster_gs_setup(a, scheme, cfg)
    setup_ms = _elapsed_ms(start)

    b = deterministic_rhs(a.num_rows, args.seed)
    apply = _TimedPreconditioner(SgsPreconditioner(precond, a, args.sweeps))
    failure = None
    start = time.perf_counter()
    try:
        if args.solver == 'cg':
            _, solve = pcg(a, b, apply, tol=tol, max_iter=max_iter)
        else:
            _, solve = gmres(a, b, apply, tol=tol, restart=args.restart, max_iter=max_iter)
    except SolverFailure as e:
        solve, failure = e.report, str(e)
    solve_ms = _elapsed_ms(start)

    record = {
        'graph': args.input,
        'num_rows': a.num_rows,
        'nnz': a.nnz,
        'kernel': f'sgs-{args.solver}',
        'scheme': args.scheme,
        'algorithm': args.algorithm if scheme is not ClusterScheme.POINT else None,
        'sweeps': args.sweeps,
        'restart': args.restart,
        'tol': tol,
        'num_clusters': precond.num_clusters,
        'num_colors': precond.num_colors,
        **solve.to_dict(),
        'failure': failure,
        'setup_time_ms': setup_ms,
        'apply_time_ms': apply.elapsed_ms,
        'preconditioner_applications': apply.calls,
        'wall_time_ms': solve_ms,
    }
    report = {**_metadata('gs-bench', args.seed, args.threads_used), 'runs': [record]}
    path = write_report(report, args.output or default_output_path('gs-bench'))

    print(f"\nSetup: {precond.num_clusters} clusters, {precond.num_colors} colors in {setup_ms:.1f} ms")
    _status(solve.converged, f"{args.solver} {'converged' if solve.converged else 'did NOT converge'} "
                             f"in {solve.iterations} iterations "
                             f"(relative residual {solve.final_relative_residual:.3e})")
    if failure:
        print(f"   {failure}")
    print(f"Report saved to: {path}")
    return EXIT_OK if solve.converged else EXIT_SOFT_FAILURE


def cmd_hash_study(args):
    _banner(f"HASH STUDY: {len(args.inputs)} input(s)")
    reproduce = {
        'seed': args.seed,
        'status_bits': settings.status_bits,
        'xorshift_shifts': ' '.join(str(s) for s in HASH_CONSTANTS['xorshift_shifts']),
        'xorshift_star_multiplier': HASH_CONSTANTS['xorshift_star_multiplier'],
    }
    rows = []
    for source in args.inputs:
        row = {'input': source, **reproduce, 'error': ''}
        try:
            _, g = _load_graph(source)
            row['num_vertices'], row['num_edges'] = g.num_vertices, g.num_edges
            for scheme in PriorityScheme:
                result = mis2(g, Mis2Config(scheme=scheme, seed=args.seed))
                row[f'{scheme.value}_iterations'] = result.iterations
                row[f'{scheme.value}_size'] = result.size
            _status(True, f"{source}: " + ", ".join(
                f"{s.value} {row[f'{s.value}_iterations']}" for s in PriorityScheme))
        except Mis2Error as e:
            logger.warning("hash study input %s failed: %s", source, e)
            row['error'] = str(e)
            _status(False, f"{source}: {e}")
        rows.append(row)

    path = Path(args.output) if args.output else default_output_path('hash-study', '.csv')
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=HASH_STUDY_FIELDS, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    print(f"\nTable saved to: {path}")
    return EXIT_SOFT_FAILURE if any(row['error'] for row in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument('--seed', type=lambda s: int(s, 0), default=settings.seed,
                        help='64-bit hash seed (default: MIS2_SEED)')
    parser.add_argument('--threads', type=int, default=settings.threads,
                        help='worker threads, 0 = all (default: MIS2_THREADS)')
    parser.add_argument('--output', help='report path (default: <report_dir>/<command>_<timestamp>)')


def build_parser():
    parser = _Parser(prog='cli.py', description='Deterministic MIS-2, coarsening and cluster Gauss-Seidel')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)
    schemes = [s.value for s in PriorityScheme]

    p = commands.add_parser('mis2', help='distance-2 maximal independent set')
    p.add_argument('input', help='.mtx path or generator spec (laplace3d:NX,NY,NZ, grid2d:NX,NY)')
    p.add_argument('--scheme', choices=schemes, default=PriorityScheme.XOR_STAR.value)
    _add_common(p)
    p.set_defaults(handler=cmd_mis2)

    p = commands.add_parser('coarsen', help='MIS-2 coarsening / aggregation')
    p.add_argument('input')
    p.add_argument('--algorithm', choices=['basic', 'agg'], default='agg')
    p.add_argument('--scheme', choices=schemes, default=PriorityScheme.XOR_STAR.value)
    _add_common(p)
    p.set_defaults(handler=cmd_coarsen)

    p = commands.add_parser('gs-bench', help='point vs cluster multicolor SGS preconditioning')
    p.add_argument('input')
    p.add_argument('--scheme', choices=['point', 'cluster'], default='cluster')
    p.add_argument('--algorithm', choices=['basic', 'agg'], default='agg',
                   help='coarsening used by the cluster scheme')
    p.add_argument('--solver', choices=['cg', 'gmres'], default='gmres')
    p.add_argument('--tol', type=float, help='relative residual target (default: 1e-12 cg, 1e-8 gmres)')
    p.add_argument('--restart', type=int, default=DEFAULT_RESTART)
    p.add_argument('--sweeps', type=int, default=1, help='symmetric sweeps per application')
    p.add_argument('--max-iter', type=int, help='iteration cap (default: 1000 cg, 800 gmres)')
    _add_common(p)
    p.set_defaults(handler=cmd_gs_bench)

    p = commands.add_parser('hash-study', help='MIS-2 iterations under every priority scheme')
    p.add_argument('inputs', nargs='*')
    _add_common(p)
    p.set_defaults(handler=cmd_hash_study)
    return parser


def main(argv=None):
    logging.basicConfig(level=settings.log_level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    if settings_error is not None:
        print(f"ERROR: {settings_error}", file=sys.stderr)
        return EXIT_ERROR
    try:
        args = build_parser().parse_args(argv)
        if args.command == 'hash-study' and not args.inputs:
            raise UsageError("hash-study needs at least one input")
        args.threads_used = apply_threads(args.threads)
        return args.handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (Mis2Error, OSError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
