from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from .acquisition import AcquisitionRequest, select_batch
from .cartography import DynamicsLog, DataMapStats, compute_datamap, assign_cartography_labels
from .config import ExperimentConfig
from .constants import Architecture, Strategy
from .exceptions import ParameterError, DatasetError, StatisticsError
from .logger import logger
from .models import MlpModel, AdamWState
from .rng import derive_rng

CARTOGRAPHY_STRATEGIES = (Strategy.cal, Strategy.dal_cal)


class InstancePool:
    """
    Featurized train and test splits plus the labeled/unlabeled partition of the train split.
    Train and test ids are separate namespaces; the test split never enters either partition.
    """
    name: str
    train_features: np.ndarray
    train_labels: np.ndarray
    train_ids: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    test_ids: np.ndarray
    class_names: List[str]
    labeled_mask: np.ndarray
    positions: Dict[int, int]

    def __init__(
            self,
            name: str,
            train_features: np.ndarray,
            train_labels: np.ndarray,
            test_features: np.ndarray,
            test_labels: np.ndarray,
            class_names: Optional[List[str]] = None,
            train_ids: Optional[np.ndarray] = None,
            test_ids: Optional[np.ndarray] = None
    ):
        self.name = name
        self.train_features = np.asarray(train_features, dtype=np.float64)
        self.train_labels = np.asarray(train_labels, dtype=np.int64)
        self.test_features = np.asarray(test_features, dtype=np.float64)
        self.test_labels = np.asarray(test_labels, dtype=np.int64)
        self.train_ids = np.arange(len(self.train_labels)) if train_ids is None \
            else np.asarray(train_ids, dtype=np.int64)
        self.test_ids = np.arange(len(self.test_labels)) if test_ids is None \
            else np.asarray(test_ids, dtype=np.int64)

        num_classes = int(max(self.train_labels.max(initial=-1), self.test_labels.max(initial=-1))) + 1
        self.class_names = class_names if class_names is not None else [str(label) for label in range(num_classes)]
        self.validate()

        self.positions = {int(instance_id): position for position, instance_id in enumerate(self.train_ids)}
        self.labeled_mask = np.zeros(len(self.train_ids), dtype=bool)

    def validate(self) -> None:
        if self.train_features.ndim != 2 or len(self.train_features) != len(self.train_labels) \
                or len(self.train_ids) != len(self.train_labels):
            raise DatasetError('Train features, labels and ids must have one row per instance')
        if self.test_features.ndim != 2 or len(self.test_features) != len(self.test_labels) \
                or len(self.test_ids) != len(self.test_labels):
            raise DatasetError('Test features, labels and ids must have one row per instance')
        if self.test_features.shape[1] != self.train_features.shape[1]:
            raise DatasetError(f'Train ({self.train_features.shape[1]}) and test ({self.test_features.shape[1]}) '
                               f'feature dimensions differ')
        if len(np.unique(self.train_ids)) != len(self.train_ids):
            raise DatasetError('Train ids must be unique')
        for labels in [self.train_labels, self.test_labels]:
            if labels.size > 0 and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise DatasetError(f'Labels must be class indices in [0, {self.num_classes})')
        if self.num_classes < 2:
            raise DatasetError(f'Need at least 2 classes, got {self.num_classes}')

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def feature_dim(self) -> int:
        return self.train_features.shape[1]

    @property
    def train_size(self) -> int:
        return len(self.train_ids)

    @property
    def labeled_count(self) -> int:
        return int(np.count_nonzero(self.labeled_mask))

    def copy(self) -> 'InstancePool':
        """Pool sharing the (read-only) data arrays, with its own labeled partition"""
        duplicate = object.__new__(InstancePool)
        duplicate.__dict__.update(self.__dict__)
        duplicate.labeled_mask = self.labeled_mask.copy()
        return duplicate

    def lookup(self, ids: Iterable[int]) -> np.ndarray:
        try:
            return np.asarray([self.positions[int(instance_id)] for instance_id in ids], dtype=np.int64)
        except KeyError as e:
            raise ParameterError(f'Unknown train instance id: {e.args[0]}') from None

    def reset(self, labeled_ids: Iterable[int]) -> None:
        self.labeled_mask[:] = False
        self.labeled_mask[self.lookup(labeled_ids)] = True

    def labeled_view(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Features, ids and gold labels of the labeled set"""
        return (self.train_features[self.labeled_mask], self.train_ids[self.labeled_mask],
                self.train_labels[self.labeled_mask])

    def unlabeled_view(self) -> Tuple[np.ndarray, np.ndarray]:
        """Features and ids of the unlabeled pool (labels stay hidden)"""
        return self.train_features[~self.labeled_mask], self.train_ids[~self.labeled_mask]

    def reveal(self, ids: Iterable[int]) -> np.ndarray:
        """
        Oracle step: return the gold labels of the given unlabeled instances and move them to the labeled set
        """
        positions = self.lookup(ids)
        if len(np.unique(positions)) != len(positions):
            raise ParameterError('Cannot reveal the same instance twice in one batch')
        if np.any(self.labeled_mask[positions]):
            raise ParameterError('Cannot reveal instances that are already labeled')

        self.labeled_mask[positions] = True
        return self.train_labels[positions]


class IterationRecord:
    seed: int
    iteration: int
    labeled_count: int
    accuracy: float
    selected_ids: np.ndarray
    fallback: Optional[Strategy]

    def __init__(self, seed: int, iteration: int, labeled_count: int, accuracy: float,
                 selected_ids: Optional[np.ndarray] = None, fallback: Optional[Strategy] = None):
        self.seed = seed
        self.iteration = iteration
        self.labeled_count = labeled_count
        self.accuracy = accuracy
        self.selected_ids = np.asarray([] if selected_ids is None else selected_ids, dtype=np.int64)
        self.fallback = fallback

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IterationRecord) and \
            (other.seed, other.iteration, other.labeled_count, other.accuracy, other.fallback) == \
            (self.seed, self.iteration, self.labeled_count, self.accuracy, self.fallback) and \
            np.array_equal(other.selected_ids, self.selected_ids)

    def __repr__(self):
        return f'IterationRecord(seed={self.seed}, iteration={self.iteration}, ' \
               f'labeled_count={self.labeled_count}, accuracy={self.accuracy})'


class SeedRun:
    """Outcome of one (strategy, seed) active learning run"""
    strategy: Strategy
    seed: int
    records: List[IterationRecord]
    datamaps: List[DataMapStats]
    score_tables: List[pd.DataFrame]

    def __init__(self, strategy: Strategy, seed: int):
        self.strategy = strategy
        self.seed = seed
        self.records = []
        self.datamaps = []
        self.score_tables = []


class RunHistory:
    """
    Accuracy trajectories of one strategy over all seeds. Iteration i is the model trained on the seed set plus
    the batches acquired at iterations 0..i-1, so every seed has n + 1 records for n acquisitions.
    """
    strategy: str
    dataset: str
    pool_size: int
    seeds: List[int]
    records: List[IterationRecord]
    datamaps: Dict[int, List[DataMapStats]]
    score_tables: List[pd.DataFrame]

    def __init__(
            self,
            strategy: str,
            dataset: str,
            pool_size: int,
            seeds: List[int],
            records: List[IterationRecord],
            datamaps: Optional[Dict[int, List[DataMapStats]]] = None,
            score_tables: Optional[List[pd.DataFrame]] = None
    ):
        self.strategy = str(strategy)
        self.dataset = dataset
        self.pool_size = pool_size
        self.seeds = list(seeds)
        self.records = sorted(records, key=lambda r: (self.seeds.index(r.seed), r.iteration))
        self.datamaps = datamaps if datamaps is not None else {}
        self.score_tables = score_tables if score_tables is not None else []

    @classmethod
    def from_runs(cls, strategy: Strategy, dataset: str, pool_size: int, runs: List[SeedRun]) -> 'RunHistory':
        return cls(
            strategy.value,
            dataset,
            pool_size,
            [run.seed for run in runs],
            [record for run in runs for record in run.records],
            {run.seed: run.datamaps for run in runs},
            [table for run in runs for table in run.score_tables]
        )

    def records_for(self, seed: int) -> List[IterationRecord]:
        return [record for record in self.records if record.seed == seed]

    @property
    def iterations(self) -> int:
        """Number of evaluated iterations per seed (acquisitions + 1)"""
        counts = {len(self.records_for(seed)) for seed in self.seeds}
        if len(counts) != 1:
            raise StatisticsError(f'Seeds of {self.strategy} have differing iteration counts: {sorted(counts)}')
        return counts.pop()

    def accuracy_matrix(self) -> np.ndarray:
        """Accuracies as (seeds x iterations)"""
        iterations = self.iterations
        return np.asarray([[record.accuracy for record in self.records_for(seed)] for seed in self.seeds]) \
            .reshape(len(self.seeds), iterations)

    def labeled_counts(self) -> np.ndarray:
        return np.asarray([record.labeled_count for record in self.records_for(self.seeds[0])], dtype=np.int64)

    def selected_ids(self, seed: int) -> np.ndarray:
        """Every id acquired for the given seed, over all iterations"""
        batches = [record.selected_ids for record in self.records_for(seed)]
        return np.unique(np.concatenate(batches)) if batches else np.asarray([], dtype=np.int64)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'strategy': self.strategy,
            'seed': [record.seed for record in self.records],
            'iteration': [record.iteration for record in self.records],
            'labeled_count': [record.labeled_count for record in self.records],
            'accuracy': [record.accuracy for record in self.records],
        }, columns=['strategy', 'seed', 'iteration', 'labeled_count', 'accuracy'])

    def selected_frame(self) -> pd.DataFrame:
        """Selected ids per (seed, iteration), space separated in acquisition order"""
        return pd.DataFrame({
            'strategy': self.strategy,
            'seed': [record.seed for record in self.records],
            'iteration': [record.iteration for record in self.records],
            'fallback': [record.fallback.value if record.fallback is not None else '' for record in self.records],
            'selected_ids': [' '.join(map(str, record.selected_ids)) for record in self.records],
        }, columns=['strategy', 'seed', 'iteration', 'fallback', 'selected_ids'])


def stratified_seed_sample(labels: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw a seed set whose class counts are proportional to the class frequencies (largest remainder rounding,
    remainder ties going to the lower class index), uniformly within each class
    :param labels: Class index per train instance
    :param size: Seed set size
    :param rng: Generator to sample with
    :return: Sorted positions into `labels`
    """
    labels = np.asarray(labels, dtype=np.int64)
    classes, counts = np.unique(labels, return_counts=True)
    if size > len(labels):
        raise ParameterError(f'Seed set size {size} exceeds the train pool size {len(labels)}')
    if size < len(classes):
        raise ParameterError(f'Seed set size {size} is smaller than the number of classes {len(classes)}, '
                             f'cannot stratify')

    quotas = counts * size / len(labels)
    allocation = np.floor(quotas).astype(np.int64)
    remainder = size - int(allocation.sum())
    order = np.lexsort((classes, -(quotas - allocation)))
    allocation[order[:remainder]] += 1
    allocation = np.minimum(allocation, counts)

    positions = [
        rng.choice(np.flatnonzero(labels == label), size=count, replace=False)
        for label, count in zip(classes, allocation)
    ]
    return np.sort(np.concatenate(positions))


def evaluate(model: MlpModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Accuracy of the model's eval-mode predictions"""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ParameterError('Cannot evaluate on an empty test set')

    return float(np.mean(model.predict(features).labels == labels))


def build_main_model(config: ExperimentConfig, pool: InstancePool, rng: np.random.Generator) \
        -> Tuple[MlpModel, AdamWState]:
    model = MlpModel(pool.feature_dim, pool.num_classes, rng, Architecture.main, config.hidden_dim,
                     config.hidden_layers, config.dropout)
    optimizer = AdamWState(model, config.learning_rate, config.beta1, config.beta2, config.adam_epsilon,
                           config.weight_decay)
    return model, optimizer


def train_main_model(config: ExperimentConfig, model: MlpModel, optimizer: AdamWState, features: np.ndarray,
                     ids: np.ndarray, labels: np.ndarray, rng: np.random.Generator, epochs: int) -> DynamicsLog:
    """
    Train for the given number of epochs, recording the training dynamics of every training instance
    """
    log = DynamicsLog(ids)
    for epoch in range(epochs):
        result = model.train_epoch(optimizer, features, labels, config.train_batch_size, rng, epoch)
        log.record(result.gold_probabilities, result.correct)

    return log


def run_seed(config: ExperimentConfig, pool: InstancePool, strategy: Strategy, seed: int) -> SeedRun:
    """
    One active learning run: stratified seed set, then n rounds of reset, train, evaluate, acquire and reveal,
    plus a closing reset-train-evaluate round on the final labeled set
    """
    strategy = Strategy(strategy)
    pool = pool.copy()
    pool.reset(pool.train_ids[stratified_seed_sample(pool.train_labels, config.seed_size,
                                                     derive_rng(seed, 'seed-set'))])

    run = SeedRun(strategy, seed)
    model, optimizer = build_main_model(config, pool, derive_rng(seed, 'init', 'main', 0))
    for iteration in range(config.iterations + 1):
        # Every round trains from scratch
        model.reset_parameters(derive_rng(seed, 'init', 'main', iteration))
        optimizer.reset(model)

        features, ids, labels = pool.labeled_view()
        log = train_main_model(config, model, optimizer, features, ids, labels,
                               derive_rng(seed, 'train', 'main', iteration), config.epochs)
        datamap = compute_datamap(log.truncate(config.datamap_epochs) if config.datamap_epochs > 0 else log)
        accuracy = evaluate(model, pool.test_features, pool.test_labels)
        run.datamaps.append(datamap)

        selected, fallback = None, None
        if iteration < config.iterations:
            unlabeled_features, unlabeled_ids = pool.unlabeled_view()
            cartography_labels = assign_cartography_labels(datamap, config.t_cor) \
                if strategy in CARTOGRAPHY_STRATEGIES else None
            request = AcquisitionRequest(model, features, ids, unlabeled_features, unlabeled_ids, config.batch_size,
                                         strategy, config, derive_rng(seed, 'acquire', strategy.value, iteration),
                                         cartography_labels)
            result = select_batch(request)
            if config.score_tables:
                table = result.score_table(iteration)
                table.insert(0, 'seed', seed)
                run.score_tables.append(table)

            pool.reveal(result.ids)
            selected, fallback = result.ids, result.fallback

        run.records.append(IterationRecord(seed, iteration, len(ids), accuracy, selected, fallback))
        logger.info(f'{strategy} seed {seed} iteration {iteration}: {len(ids)} labeled, accuracy {accuracy:.4f}')

    return run


def run_experiments(config: ExperimentConfig, pool: InstancePool, strategies: Optional[List[Strategy]] = None,
                    seeds: Optional[List[int]] = None, jobs: int = 1) -> Dict[Strategy, RunHistory]:
    """
    Run every (strategy, seed) combination, optionally in parallel worker processes
    :param config: Experiment config
    :param pool: Featurized dataset (its labeled partition is not touched)
    :param strategies: Strategies to run (default: config.strategies)
    :param seeds: Seeds to run (default: config.seeds)
    :param jobs: Number of worker processes, 1 runs everything in this process
    :return: History per strategy
    """
    strategies = [Strategy(strategy) for strategy in (strategies if strategies is not None else config.strategies)]
    seeds = list(seeds if seeds is not None else config.seeds)
    config.validate_against_pool(pool.train_size, pool.num_classes)
    if jobs < 1:
        raise ParameterError(f'Number of jobs must be positive, got {jobs}')

    tasks = [(strategy, seed) for strategy in strategies for seed in seeds]
    if jobs == 1:
        runs = [run_seed(config, pool, strategy, seed) for strategy, seed in tasks]
    else:
        logger.info(f'Running {len(tasks)} (strategy, seed) combinations on {jobs} worker processes')
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(run_seed, config, pool, strategy, seed) for strategy, seed in tasks]
            runs = [future.result() for future in futures]

    return {
        strategy: RunHistory.from_runs(strategy, pool.name, pool.train_size,
                                       [run for run in runs if run.strategy is strategy])
        for strategy in strategies
    }


def run_experiment(config: ExperimentConfig, pool: InstancePool, strategy: Optional[Strategy] = None,
                   jobs: int = 1) -> RunHistory:
    strategy = Strategy(strategy) if strategy is not None else config.strategies[0]
    return run_experiments(config, pool, [strategy], jobs=jobs)[strategy]


def batch_statistic(history: RunHistory, seed: int, iteration: int) -> Tuple[float, float, float]:
    """
    Mean (confidence, variability, correctness) of the batch acquired at `iteration`, taken from the data map
    of the following active learning training run
    """
    records = history.records_for(seed)
    datamaps = history.datamaps.get(seed)
    if not records or datamaps is None:
        raise StatisticsError(f'No recorded training dynamics for seed {seed}')
    # The last acquired batch is only followed by the closing evaluation run
    if not 0 <= iteration < len(records) - 2:
        raise StatisticsError(f'Batch of iteration {iteration} has no following AL training run')

    return datamaps[iteration + 1].subset(records[iteration].selected_ids).means()


def batch_statistics(history: RunHistory) -> pd.DataFrame:
    """One row per (seed, iteration) for iterations 0..n-2"""
    rows = []
    for seed in history.seeds:
        for iteration in range(len(history.records_for(seed)) - 2):
            confidence, variability, correctness = batch_statistic(history, seed, iteration)
            rows.append((history.strategy, seed, iteration, confidence, variability, correctness))

    return pd.DataFrame(rows, columns=['strategy', 'seed', 'iteration', 'confidence', 'variability', 'correctness'])


def threshold_sweep(config: ExperimentConfig, pool: InstancePool, thresholds: Optional[List[float]] = None,
                    jobs: int = 1) -> pd.DataFrame:
    """
    Run cartography selection once per correctness threshold and report the final accuracies
    """
    thresholds = thresholds if thresholds is not None else config.sweep_thresholds
    rows = []
    for threshold in thresholds:
        history = run_experiment(config.replace(t_cor=threshold), pool, Strategy.cal, jobs)
        final = history.accuracy_matrix()[:, -1]
        fallbacks = sum(record.fallback is not None for record in history.records)
        rows.append((threshold, len(final), float(np.mean(final)), float(np.std(final)), fallbacks))
        logger.info(f'Threshold {threshold}: mean final accuracy {np.mean(final):.4f}')

    return pd.DataFrame(rows, columns=['t_cor', 'seeds', 'final_accuracy', 'final_accuracy_std', 'fallbacks'])


def full_data_reference(config: ExperimentConfig, pool: InstancePool,
                        seeds: Optional[List[int]] = None) -> pd.DataFrame:
    """
    Accuracy of the main classifier trained on the complete train pool, per seed
    """
    seeds = list(seeds if seeds is not None else config.seeds)
    rows = []
    for seed in seeds:
        model, optimizer = build_main_model(config, pool, derive_rng(seed, 'init', 'reference'))
        train_main_model(config, model, optimizer, pool.train_features, pool.train_ids, pool.train_labels,
                         derive_rng(seed, 'train', 'reference'), config.epochs)
        accuracy = evaluate(model, pool.test_features, pool.test_labels)
        rows.append((seed, pool.train_size, accuracy))
        logger.info(f'Full-data reference seed {seed}: accuracy {accuracy:.4f}')

    return pd.DataFrame(rows, columns=['seed', 'train_size', 'accuracy'])
