from typing import Dict, List, Optional, Tuple

import numpy as np

from .constants import Region
from .exceptions import ParameterError, ShapeError


class DynamicsLog:
    """
    Training dynamics of a fixed set of instances: gold-label probability and correctness per epoch,
    both stored as (instances x epochs) matrices
    """
    ids: np.ndarray
    probabilities: np.ndarray
    correctness: np.ndarray

    def __init__(
            self,
            ids: np.ndarray,
            probabilities: Optional[np.ndarray] = None,
            correctness: Optional[np.ndarray] = None
    ):
        self.ids = np.asarray(ids, dtype=np.int64)
        size = len(self.ids)
        self.probabilities = np.empty((size, 0)) if probabilities is None else np.asarray(probabilities, dtype=np.float64)
        self.correctness = np.empty((size, 0), dtype=bool) if correctness is None else np.asarray(correctness, dtype=bool)
        self.validate()

    @property
    def epochs(self) -> int:
        return self.probabilities.shape[1]

    def __len__(self):
        return len(self.ids)

    def validate(self) -> None:
        if self.probabilities.ndim != 2 or self.probabilities.shape != self.correctness.shape:
            raise ShapeError(f'Probability {self.probabilities.shape} and correctness {self.correctness.shape} '
                             f'matrices must share the same 2-D shape')
        if self.probabilities.shape[0] != len(self.ids):
            raise ShapeError(f'Got {len(self.ids)} ids for {self.probabilities.shape[0]} dynamics rows')
        if self.probabilities.size > 0 and (self.probabilities.min() < 0.0 or self.probabilities.max() > 1.0):
            raise ParameterError('Gold-label probabilities must be in [0, 1]')

    def record(self, gold_probabilities: np.ndarray, correct: np.ndarray) -> None:
        """
        Append one epoch of dynamics (one value per instance, in id order)
        """
        gold_probabilities = np.asarray(gold_probabilities, dtype=np.float64).reshape(-1, 1)
        correct = np.asarray(correct, dtype=bool).reshape(-1, 1)
        if len(gold_probabilities) != len(self.ids) or len(correct) != len(self.ids):
            raise ShapeError(f'Epoch record covers {len(gold_probabilities)} instances, log tracks {len(self.ids)}')

        self.probabilities = np.hstack([self.probabilities, gold_probabilities])
        self.correctness = np.hstack([self.correctness, correct])
        self.validate()

    def truncate(self, epochs: int) -> 'DynamicsLog':
        """Log restricted to the first `epochs` epochs"""
        if not 1 <= epochs <= self.epochs:
            raise ParameterError(f'Cannot truncate a {self.epochs}-epoch log to {epochs} epochs')

        return DynamicsLog(self.ids, self.probabilities[:, :epochs], self.correctness[:, :epochs])


class DataMapStats:
    """Per-instance confidence, variability and correctness"""
    ids: np.ndarray
    confidence: np.ndarray
    variability: np.ndarray
    correctness: np.ndarray
    epochs: int

    def __init__(self, ids: np.ndarray, confidence: np.ndarray, variability: np.ndarray, correctness: np.ndarray,
                 epochs: int):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.confidence = np.asarray(confidence, dtype=np.float64)
        self.variability = np.asarray(variability, dtype=np.float64)
        self.correctness = np.asarray(correctness, dtype=np.float64)
        self.epochs = epochs

    def __len__(self):
        return len(self.ids)

    def positions(self, ids: np.ndarray) -> np.ndarray:
        lookup: Dict[int, int] = {int(instance_id): position for position, instance_id in enumerate(self.ids)}
        try:
            return np.asarray([lookup[int(instance_id)] for instance_id in ids], dtype=np.int64)
        except KeyError as e:
            raise ParameterError(f'Instance {e.args[0]} is not part of the data map') from None

    def subset(self, ids: np.ndarray) -> 'DataMapStats':
        positions = self.positions(ids)
        return DataMapStats(self.ids[positions], self.confidence[positions], self.variability[positions],
                            self.correctness[positions], self.epochs)

    def means(self) -> Tuple[float, float, float]:
        return float(np.mean(self.confidence)), float(np.mean(self.variability)), float(np.mean(self.correctness))


class CartographyLabels:
    """Binary high-cor (1) / low-cor (0) label per instance"""
    ids: np.ndarray
    labels: np.ndarray
    threshold: float

    def __init__(self, ids: np.ndarray, labels: np.ndarray, threshold: float):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.threshold = threshold

    def __len__(self):
        return len(self.ids)

    @property
    def is_degenerate(self) -> bool:
        """True if all instances share one label (a binary classifier cannot be trained on them)"""
        return len(np.unique(self.labels)) < 2


def require_epochs(log: DynamicsLog) -> None:
    if log.epochs < 1:
        raise ParameterError('Data map statistics need at least one recorded epoch')


def compute_confidence(log: DynamicsLog) -> np.ndarray:
    require_epochs(log)
    return np.mean(log.probabilities, axis=1)


def compute_variability(log: DynamicsLog) -> np.ndarray:
    require_epochs(log)
    variability = np.std(log.probabilities, axis=1)
    # Constant rows are exactly 0, even if the mean picks up rounding noise
    constant = np.all(log.probabilities == log.probabilities[:, :1], axis=1)
    return np.where(constant, 0.0, variability)


def compute_correctness(log: DynamicsLog) -> np.ndarray:
    require_epochs(log)
    return np.count_nonzero(log.correctness, axis=1) / log.epochs


def compute_datamap(log: DynamicsLog) -> DataMapStats:
    return DataMapStats(
        log.ids,
        compute_confidence(log),
        compute_variability(log),
        compute_correctness(log),
        log.epochs
    )


def assign_cartography_labels(stats: DataMapStats, t_cor: float = 0.2) -> CartographyLabels:
    """
    Label instances high-cor (1) if their correctness is strictly above t_cor, low-cor (0) otherwise
    """
    if not 0.0 <= t_cor < 1.0:
        raise ParameterError(f'Correctness threshold must be in [0, 1), got {t_cor}')

    return CartographyLabels(stats.ids, (stats.correctness > t_cor).astype(np.int64), t_cor)


def classify_regions(stats: DataMapStats, fraction: float = 1 / 3) -> List[Region]:
    """
    Assign data map regions: the top `fraction` by variability is ambiguous; of the remaining instances,
    the top `fraction` by confidence is easy-to-learn and the bottom `fraction` hard-to-learn
    """
    if not 0.0 < fraction <= 0.5:
        raise ParameterError(f'Region fraction must be in (0, 0.5], got {fraction}')

    size = len(stats)
    count = int(np.floor(size * fraction))
    regions = [Region.unassigned] * size
    if count == 0:
        return regions

    # Stable orderings, ties resolved by id
    by_variability = np.lexsort((stats.ids, -stats.variability))
    ambiguous = set(by_variability[:count].tolist())
    remaining = np.asarray([position for position in range(size) if position not in ambiguous], dtype=np.int64)
    by_confidence = remaining[np.lexsort((stats.ids[remaining], -stats.confidence[remaining]))]

    for position in ambiguous:
        regions[position] = Region.ambiguous
    for position in by_confidence[:count]:
        regions[position] = Region.easy
    for position in by_confidence[count:][::-1][:count]:
        regions[position] = Region.hard

    return regions


def datamap_density(stats: DataMapStats, bins: int = 20) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Instance counts over a (variability x confidence) grid spanning [0, 0.5] x [0, 1]
    :return: counts of shape (bins, bins), variability bin edges, confidence bin edges
    """
    if bins < 1:
        raise ParameterError(f'Density needs at least one bin, got {bins}')

    return np.histogram2d(stats.variability, stats.confidence, bins=bins, range=[[0.0, 0.5], [0.0, 1.0]])
