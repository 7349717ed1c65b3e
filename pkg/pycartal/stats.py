from itertools import combinations, permutations
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

from .constants import BonferroniMode
from .exceptions import StatisticsError
from .logger import logger
from .rng import derive_rng
from .simulator import RunHistory

# Integration step over the quantile levels t in (0, 1)
QUANTILE_STEP = 0.005


class ScoreSample:
    """Evaluation scores of one strategy (e.g. accuracies over seeds and iterations)"""
    strategy: str
    scores: np.ndarray

    def __init__(self, strategy: str, scores: np.ndarray):
        self.strategy = str(strategy)
        self.scores = np.asarray(scores, dtype=np.float64).ravel()
        if len(self.scores) == 0:
            raise StatisticsError(f'Score sample of {self.strategy} is empty')
        if not np.all(np.isfinite(self.scores)):
            raise StatisticsError(f'Score sample of {self.strategy} contains non-finite values')

    def __len__(self):
        return len(self.scores)


class AsoResult:
    epsilon: float
    violation_ratio: float
    alpha: float
    bootstrap_iterations: int
    pair: Tuple[str, str]
    degenerate: bool
    margin: float

    def __init__(self, epsilon: float, violation_ratio: float, alpha: float, bootstrap_iterations: int,
                 pair: Tuple[str, str], degenerate: bool = False, margin: float = 0.0):
        self.epsilon = epsilon
        self.violation_ratio = violation_ratio
        self.alpha = alpha
        self.bootstrap_iterations = bootstrap_iterations
        self.pair = pair
        self.degenerate = degenerate
        self.margin = margin

    def __repr__(self):
        return f'AsoResult({self.pair[0]} vs {self.pair[1]}: epsilon={self.epsilon:.4f}, alpha={self.alpha})'


class AsoMatrix:
    """
    Pairwise epsilon grid: cell (row, column) tests whether the row strategy almost stochastically
    dominates the column strategy. The diagonal is left blank (NaN).
    """
    labels: List[str]
    epsilon: np.ndarray
    alpha: float
    corrected_alpha: float
    results: Dict[Tuple[str, str], AsoResult]

    def __init__(self, labels: List[str], alpha: float, corrected_alpha: float,
                 results: Dict[Tuple[str, str], AsoResult]):
        self.labels = labels
        self.alpha = alpha
        self.corrected_alpha = corrected_alpha
        self.results = results
        self.epsilon = np.full((len(labels), len(labels)), np.nan)
        for (row, column), result in results.items():
            self.epsilon[labels.index(row), labels.index(column)] = result.epsilon

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.epsilon, index=pd.Index(self.labels, name='strategy'), columns=self.labels)


class OverlapResult:
    strategy_a: str
    strategy_b: str
    overlap_count: int
    total: int

    def __init__(self, strategy_a: str, strategy_b: str, overlap_count: int, total: int):
        self.strategy_a = strategy_a
        self.strategy_b = strategy_b
        self.overlap_count = overlap_count
        self.total = total


def quantile_function(sorted_scores: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """
    Empirical quantile function F^-1(t) = smallest x with F(x) >= t, evaluated along the last axis
    """
    size = sorted_scores.shape[-1]
    indices = np.clip(np.ceil(size * levels).astype(np.int64) - 1, 0, size - 1)
    return sorted_scores[..., indices]


def violation_ratio(sorted_a: np.ndarray, sorted_b: np.ndarray) -> np.ndarray:
    """
    Share of the squared quantile distance where a falls below b (0: a dominates b, 1: b dominates a).
    Accepts single samples or stacks of samples along the leading axes; 0.5 where both quantile functions agree.
    """
    levels = np.arange(QUANTILE_STEP, 1.0, QUANTILE_STEP)
    difference = quantile_function(sorted_a, levels) - quantile_function(sorted_b, levels)
    squared = difference ** 2
    violation = np.sum(np.where(difference < 0.0, squared, 0.0), axis=-1)
    total = np.sum(squared, axis=-1)
    return np.where(total > 0.0, violation / np.where(total > 0.0, total, 1.0), 0.5)


def pooled_ranks(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mid-ranks of both samples within their union, scaled to (0, 1]"""
    ranks = rankdata(np.concatenate([a, b])) / (len(a) + len(b))
    return ranks[:len(a)], ranks[len(a):]


def aso_test(
        a: ScoreSample,
        b: ScoreSample,
        alpha: float = 0.05,
        bootstrap_iterations: int = 1000,
        rng: Optional[np.random.Generator] = None,
        samples: int = 1000
) -> AsoResult:
    """
    Almost stochastic order test of "a is better than b"
    :param a: Scores of the presumably better strategy
    :param b: Scores of the other strategy
    :param alpha: Significance level
    :param bootstrap_iterations: Number of bootstrap iterations
    :param rng: Generator for the bootstrap
    :param samples: Number of draws from each quantile function per bootstrap iteration
    :return: Result whose epsilon is an upper confidence bound of the violation ratio, clipped to [0, 1]
    """
    if not 0.0 < alpha <= 0.5:
        raise StatisticsError(f'Significance level must be in (0, 0.5], got {alpha}')
    if bootstrap_iterations < 100:
        raise StatisticsError(f'Need at least 100 bootstrap iterations, got {bootstrap_iterations}')
    if samples < 1:
        raise StatisticsError(f'Need at least one draw per bootstrap iteration, got {samples}')
    rng = rng if rng is not None else derive_rng(0, 'aso', a.strategy, b.strategy)
    pair = (a.strategy, b.strategy)

    sorted_a, sorted_b = np.sort(a.scores), np.sort(b.scores)
    if np.array_equal(sorted_a, sorted_b):
        logger.warning(f'Identical score distributions for {pair[0]} and {pair[1]}, no order to test')
        return AsoResult(0.5, 0.5, alpha, bootstrap_iterations, pair, degenerate=True)

    ranks_a, ranks_b = pooled_ranks(a.scores, b.scores)
    ranks_a, ranks_b = np.sort(ranks_a), np.sort(ranks_b)
    ratio = float(violation_ratio(ranks_a, ranks_b))

    # Resample from both quantile functions
    draws_a = np.sort(quantile_function(ranks_a, rng.random((bootstrap_iterations, samples))), axis=1)
    draws_b = np.sort(quantile_function(ranks_b, rng.random((bootstrap_iterations, samples))), axis=1)
    bootstrapped = violation_ratio(draws_a, draws_b)

    size_a, size_b = len(a), len(b)
    sample_scale = np.sqrt(size_a * size_b / (size_a + size_b))
    bootstrap_scale = np.sqrt(samples / 2.0)
    sigma = float(np.std(bootstrap_scale * (bootstrapped - ratio)))

    # Width of the one-sided confidence interval above the violation ratio
    margin = float(-sigma / sample_scale * norm.ppf(alpha))
    epsilon = float(np.clip(ratio + margin, 0.0, 1.0))
    logger.debug(f'ASO {pair[0]} vs {pair[1]}: violation ratio {ratio:.4f}, sigma {sigma:.4f}, '
                 f'epsilon {epsilon:.4f}')

    return AsoResult(epsilon, ratio, alpha, bootstrap_iterations, pair, margin=margin)


def bonferroni_divisor(strategies: int, mode: BonferroniMode = BonferroniMode.ordered) -> int:
    if mode is BonferroniMode.ordered:
        return strategies * (strategies - 1)
    if mode is BonferroniMode.unordered:
        return strategies * (strategies - 1) // 2
    return 1


def aso_matrix(
        samples: List[ScoreSample],
        alpha: float = 0.05,
        bootstrap_iterations: int = 1000,
        aso_samples: int = 1000,
        bonferroni: BonferroniMode = BonferroniMode.ordered,
        seed: int = 0
) -> AsoMatrix:
    """
    Test every ordered pair of samples at the Bonferroni-corrected significance level
    """
    labels = [sample.strategy for sample in samples]
    if len(samples) < 2:
        raise StatisticsError(f'Need at least 2 score samples for a comparison grid, got {len(samples)}')
    if len(set(labels)) != len(labels):
        raise StatisticsError(f'Score sample labels must be distinct, got {labels}')

    corrected_alpha = alpha / bonferroni_divisor(len(samples), BonferroniMode(bonferroni))
    logger.info(f'Comparing {len(samples)} strategies at corrected significance level {corrected_alpha:.6g}')

    results = {}
    for a, b in permutations(samples, 2):
        results[(a.strategy, b.strategy)] = aso_test(a, b, corrected_alpha, bootstrap_iterations,
                                                     derive_rng(seed, 'aso', a.strategy, b.strategy), aso_samples)

    return AsoMatrix(labels, alpha, corrected_alpha, results)


def score_samples(histories: List[RunHistory], iteration: Optional[int] = None) -> List[ScoreSample]:
    """
    One score sample per history: all accuracies pooled over seeds and iterations, or only the per-seed
    accuracies of a single iteration
    """
    samples = []
    for history in histories:
        accuracies = history.accuracy_matrix()
        if iteration is not None:
            if not 0 <= iteration < accuracies.shape[1]:
                raise StatisticsError(f'History of {history.strategy} has no iteration {iteration}')
            accuracies = accuracies[:, iteration]
        samples.append(ScoreSample(history.strategy, accuracies))

    return samples


def aso_per_iteration(
        history_a: RunHistory,
        history_b: RunHistory,
        alpha: float = 0.05,
        bootstrap_iterations: int = 1000,
        aso_samples: int = 1000,
        seed: int = 0
) -> List[AsoResult]:
    if history_a.iterations != history_b.iterations:
        raise StatisticsError(f'Histories of {history_a.strategy} ({history_a.iterations} iterations) and '
                              f'{history_b.strategy} ({history_b.iterations} iterations) are not aligned')

    results = []
    for iteration in range(history_a.iterations):
        a, b = score_samples([history_a, history_b], iteration)
        results.append(aso_test(a, b, alpha, bootstrap_iterations,
                                derive_rng(seed, 'aso', a.strategy, b.strategy, iteration), aso_samples))

    return results


def aso_matrices_per_iteration(
        histories: List[RunHistory],
        alpha: float = 0.05,
        bootstrap_iterations: int = 1000,
        aso_samples: int = 1000,
        bonferroni: BonferroniMode = BonferroniMode.ordered,
        seed: int = 0
) -> List[AsoMatrix]:
    iterations = {history.iterations for history in histories}
    if len(iterations) != 1:
        raise StatisticsError(f'Histories have differing iteration counts: {sorted(iterations)}')

    return [
        aso_matrix(score_samples(histories, iteration), alpha, bootstrap_iterations, aso_samples, bonferroni, seed)
        for iteration in range(iterations.pop())
    ]


def batch_overlap(run_a: RunHistory, run_b: RunHistory) -> OverlapResult:
    """
    Number of instances both strategies acquired, summed over seeds (total: instances acquired by `run_a`)
    """
    if run_a.dataset != run_b.dataset or run_a.pool_size != run_b.pool_size:
        raise StatisticsError(f'Cannot compare selections on different datasets '
                              f'({run_a.dataset}/{run_a.pool_size} vs {run_b.dataset}/{run_b.pool_size})')
    if sorted(run_a.seeds) != sorted(run_b.seeds):
        raise StatisticsError(f'Cannot compare selections over different seeds ({run_a.seeds} vs {run_b.seeds})')

    overlap, total = 0, 0
    for seed in run_a.seeds:
        selected_a = run_a.selected_ids(seed)
        overlap += len(np.intersect1d(selected_a, run_b.selected_ids(seed)))
        total += len(selected_a)

    return OverlapResult(run_a.strategy, run_b.strategy, overlap, total)


def overlap_report(histories: List[RunHistory]) -> pd.DataFrame:
    """Overlap of every unordered pair of histories"""
    if len(histories) < 2:
        raise StatisticsError(f'Need at least 2 histories for an overlap report, got {len(histories)}')

    rows = []
    for run_a, run_b in combinations(histories, 2):
        result = batch_overlap(run_a, run_b)
        rows.append((result.strategy_a, result.strategy_b, result.overlap_count, result.total))

    return pd.DataFrame(rows, columns=['strategy_a', 'strategy_b', 'overlap_count', 'total'])
