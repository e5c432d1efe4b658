"""Command-line entry point for fks3d."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Setup path
sys.path.insert(0, str(Path(__file__).parent))

from benchmark import format_scaling_table, parse_worker_counts, scaling_benchmark
from config import COLLISIONS, DEFAULT_T_FINAL, KEYS, Config, RunConfig, parse_dims
from decomposition import enumerate_decompositions, format_decompositions
from errors import FksError, OutputError
from logger import get_logger, set_verbose
from outputs import emit_outputs
from phase_space import build_spatial_grid
from simulation import run_simulation

logger = get_logger(__name__)

# flags whose names differ from their config keys
FLAG_ALIASES = {'n_cycles': '--cycles', 'out_dir': '--out'}
METAVARS = {'dims': 'PxxPyxPz', 'out_dir': 'DIR', 'n_cycles': 'N', 't_final': 'T'}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fks3d',
        description='3D x 3D Fast Kinetic Scheme solver (BGK or spectral Boltzmann collisions) '
                    'on a domain-decomposed set of workers.')
    parser.add_argument('--config', type=Path, help='key=value configuration file')
    for key in KEYS:
        flag = FLAG_ALIASES.get(key, '--' + key.replace('_', '-'))
        kwargs = {'dest': key, 'default': None, 'metavar': METAVARS.get(key, key.upper())}
        if key == 'collision':
            kwargs = {'dest': key, 'default': None, 'choices': COLLISIONS}
        parser.add_argument(flag, help=f'override the {key} configuration key', **kwargs)
    parser.add_argument('--bench', metavar='W1,W2,...',
                        help='run a strong-scaling benchmark over these worker counts')
    parser.add_argument('--decompositions', type=int, metavar='N',
                        help='list the decompositions of the grid over N workers and exit')
    parser.add_argument('--verbose', action='store_true', help='log progress at INFO level')
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File values, then command-line overrides, validated into a RunConfig."""
    config = Config.load(args.config) if args.config else Config()
    overrides = {key: getattr(args, key) for key in KEYS if getattr(args, key) is not None}

    if 'n_cycles' in overrides:
        config.unset('t_final')
    if 't_final' in overrides:
        config.unset('n_cycles')
    if 'dims' in overrides and 'workers' not in overrides:
        px, py, pz = parse_dims(overrides['dims'])
        overrides['workers'] = px * py * pz
    if 'workers' in overrides and 'dims' not in overrides:
        dims = config.get_dims()
        if dims is not None and dims[0] * dims[1] * dims[2] != int(overrides['workers']):
            logger.info(f"Dropping dims {dims} from the config file: they do not match --workers")
            config.unset('dims')
    config.update(overrides)
    if config.get('t_final') is None and config.get('n_cycles') is None:
        config.set('t_final', DEFAULT_T_FINAL)
    return config.to_run_config()


def _show_decompositions(config: RunConfig, workers: int) -> None:
    sgrid = build_spatial_grid(config.spatial_n, config.x_min, config.x_max)
    rows = enumerate_decompositions(sgrid, workers, config.velocity_n ** 3)
    print(f"{config.spatial_n}^3 cells x {config.velocity_n}^3 velocities")
    print(format_decompositions(rows, workers))


def _run_benchmark(config: RunConfig, counts_text: str) -> None:
    rows = scaling_benchmark(config, parse_worker_counts(counts_text))
    table = format_scaling_table(rows)
    print(table)
    path = Path(config.out_dir) / 'scaling.txt'
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table + '\n', encoding='utf-8')
    except OSError as e:
        raise OutputError(f"cannot write benchmark table ({e.strerror})", path) from e


def _run(config: RunConfig) -> None:
    result = run_simulation(config, keep_masses=False)
    paths = emit_outputs(result.conserved, result.harness.sgrid, result.report, config)
    print(f"{result.cycles} cycles to t={result.time:.6g} on {config.workers} worker(s)")
    print(result.report.to_table())
    for kind, path in paths.items():
        print(f"{kind}: {path}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_verbose(True)
    try:
        config = resolve_config(args)
        if args.decompositions is not None:
            _show_decompositions(config, args.decompositions)
        elif args.bench:
            _run_benchmark(config, args.bench)
        else:
            _run(config)
    except FksError as e:
        logger.error(f"{e.category} error: {e}")
        print(f"fks3d: {e.category} error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
