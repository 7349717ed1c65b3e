import argparse
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd

from . import __version__
from .cartography import DynamicsLog, compute_datamap, assign_cartography_labels, datamap_density
from .config import ExperimentConfig
from .constants import AsoMode, DatamapSplit
from .data_io import build_pool, provenance_header, write_histories, write_table, read_histories, \
    export_datamap, emit_svg_datamap, emit_svg_curves, density_frame, aso_frame, write_aso_matrix
from .exceptions import Error, ConfigError, DatasetError, StatisticsError
from .logger import logger, configure_logging
from .rng import derive_rng
from .simulator import InstancePool, RunHistory, run_experiments, batch_statistics, stratified_seed_sample, \
    build_main_model, train_main_model, threshold_sweep, full_data_reference
from .stats import aso_matrix, aso_matrices_per_iteration, score_samples, overlap_report

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Parse the config file (if any), then apply --seed-list, --alpha and every --set override in that order
    """
    overrides = []
    if getattr(args, 'seed_list', None):
        overrides.append(f'seeds={args.seed_list}')
    if getattr(args, 'alpha', None) is not None:
        overrides.append(f'alpha={args.alpha}')
    overrides.extend(args.set or [])

    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_text('', overrides)


def prepare(config: ExperimentConfig) -> InstancePool:
    """Validation shared by every command that trains: static checks, dataset loading, pool checks"""
    config.validate()
    pool = build_pool(config)
    config.validate_against_pool(pool.train_size, pool.num_classes)
    return pool


def cmd_run(args: argparse.Namespace) -> None:
    config = load_config(args)
    pool = prepare(config)
    out = Path(args.out)
    header = provenance_header(config, pool.train_size, pool.name)

    histories = list(run_experiments(config, pool, jobs=args.jobs).values())
    write_histories(histories, out / 'history.csv', header)
    write_table(pd.concat([batch_statistics(history) for history in histories], ignore_index=True),
                out / 'batch_statistics.csv', header)
    if config.score_tables:
        tables = [table for history in histories for table in history.score_tables]
        write_table(pd.concat(tables, ignore_index=True), out / 'score_tables.csv', header)


def cmd_datamap(args: argparse.Namespace) -> None:
    config = load_config(args)
    pool = prepare(config)
    seed = config.seeds[0]

    if config.datamap_split is DatamapSplit.seed:
        positions = stratified_seed_sample(pool.train_labels, config.seed_size, derive_rng(seed, 'seed-set'))
    else:
        positions = slice(None)
    features, ids, labels = pool.train_features[positions], pool.train_ids[positions], pool.train_labels[positions]
    logger.info(f'Mapping {len(ids)} instances over {config.datamap_train_epochs} epochs')

    model, optimizer = build_main_model(config, pool, derive_rng(seed, 'init', 'datamap'))
    log: DynamicsLog = train_main_model(config, model, optimizer, features, ids, labels,
                                        derive_rng(seed, 'train', 'datamap'), config.datamap_train_epochs)
    stats = compute_datamap(log)
    cartography_labels = assign_cartography_labels(stats, config.t_cor)

    out = Path(args.out)
    header = provenance_header(config, pool.train_size, pool.name, split=config.datamap_split.value,
                               epochs=stats.epochs)
    export_datamap(stats, labels, cartography_labels, out / 'datamap.csv', header)
    emit_svg_datamap(stats, out / 'datamap.svg', header)
    write_table(density_frame(*datamap_density(stats)), out / 'density.csv', header)


def load_histories(paths: List[str]) -> List[RunHistory]:
    """Histories of all files, labels made unique by appending ":<file index>" to repeated ones"""
    histories, labels = [], set()
    for index, path in enumerate(paths):
        for history in read_histories(path):
            if history.strategy in labels:
                history.strategy = f'{history.strategy}:{index}'
            labels.add(history.strategy)
            histories.append(history)

    if not histories:
        raise DatasetError(f'No histories found in {", ".join(paths)}')

    return histories


def history_header(config: ExperimentConfig, histories: List[RunHistory], **extra) -> str:
    """Provenance of an analysis: its own config, plus the pool and seeds of the analysed runs"""
    seeds = sorted({seed for history in histories for seed in history.seeds})
    return provenance_header(config, histories[0].pool_size, histories[0].dataset, seeds, **extra)


def cmd_aso(args: argparse.Namespace) -> None:
    config = load_config(args)
    histories = load_histories(args.histories)
    if len(histories) < 2:
        raise StatisticsError(f'Significance testing needs at least 2 strategies, got {len(histories)}')

    out = Path(args.out)
    header = history_header(config, histories, alpha=config.alpha,
                            bootstrap_iterations=config.bootstrap_iterations, bonferroni=config.bonferroni.value,
                            mode=config.aso_mode.value)
    seed = config.seeds[0]
    if config.aso_mode is AsoMode.pooled:
        matrix = aso_matrix(score_samples(histories), config.alpha, config.bootstrap_iterations, config.aso_samples,
                            config.bonferroni, seed)
        write_aso_matrix(matrix, out / 'aso.csv', header)
        write_table(aso_frame([matrix]), out / 'aso_pairs.csv', header)
    else:
        matrices = aso_matrices_per_iteration(histories, config.alpha, config.bootstrap_iterations,
                                              config.aso_samples, config.bonferroni, seed)
        write_table(aso_frame(matrices, list(range(len(matrices)))), out / 'aso_pairs.csv', header)


def cmd_overlap(args: argparse.Namespace) -> None:
    config = load_config(args)
    histories = load_histories(args.histories)
    write_table(overlap_report(histories), Path(args.out) / 'overlap.csv', history_header(config, histories))


def cmd_plot(args: argparse.Namespace) -> None:
    config = load_config(args)
    histories = load_histories(args.histories)
    emit_svg_curves(histories, Path(args.out) / 'curves.svg', history_header(config, histories))


def cmd_validate_config(args: argparse.Namespace) -> None:
    config = load_config(args)
    pool = prepare(config)
    print(f'Config is valid (hash {config.config_hash()}, {pool.train_size} train instances, '
          f'{pool.num_classes} classes)')


def cmd_sweep(args: argparse.Namespace) -> None:
    config = load_config(args)
    pool = prepare(config)
    header = provenance_header(config, pool.train_size, pool.name)
    write_table(threshold_sweep(config, pool, jobs=args.jobs), Path(args.out) / 'sweep.csv', header)


def cmd_reference(args: argparse.Namespace) -> None:
    config = load_config(args)
    pool = prepare(config)
    header = provenance_header(config, pool.train_size, pool.name)
    write_table(full_data_reference(config, pool), Path(args.out) / 'reference.csv', header)


COMMANDS: Dict[str, Callable[[argparse.Namespace], None]] = {
    'run': cmd_run,
    'datamap': cmd_datamap,
    'aso': cmd_aso,
    'overlap': cmd_overlap,
    'plot': cmd_plot,
    'validate-config': cmd_validate_config,
    'sweep': cmd_sweep,
    'reference': cmd_reference,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pycartal', description='Cartography active learning experiments')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default='INFO', help='Log level (DEBUG, INFO, WARNING, ...)')
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Flat key = value config file')
    common.add_argument('--out', default='.', help='Output directory')
    common.add_argument('--set', action='append', metavar='KEY=VALUE', help='Config override (repeatable)')

    for command in ['run', 'datamap', 'validate-config', 'sweep', 'reference']:
        subparser = subparsers.add_parser(command, parents=[common])
        subparser.add_argument('--seed-list', help='Comma-separated seeds, overrides the seeds config key')
        if command in ['run', 'sweep']:
            subparser.add_argument('--jobs', type=int, default=1, help='Parallel worker processes')

    aso = subparsers.add_parser('aso', parents=[common])
    aso.add_argument('--alpha', type=float, help='Significance level before Bonferroni correction')
    aso.add_argument('--seed-list', help='Comma-separated seeds, the first one seeds the bootstrap')
    aso.add_argument('histories', nargs='+', help='History files written by "run"')

    for command in ['overlap', 'plot']:
        subparser = subparsers.add_parser(command, parents=[common])
        subparser.add_argument('histories', nargs='+', help='History files written by "run"')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f'Invalid configuration: {e}')
        return EXIT_CONFIG_ERROR
    except Error as e:
        logger.error(f'{args.command} failed: {e}')
        return EXIT_RUNTIME_ERROR

    return EXIT_OK
