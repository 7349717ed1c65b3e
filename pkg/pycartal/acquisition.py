from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd

from .cartography import CartographyLabels
from .config import ExperimentConfig
from .constants import Architecture, Strategy, DISCRIMINATOR_LABELED, DISCRIMINATOR_UNLABELED
from .exceptions import SelectionError, DegenerateLabelsError
from .logger import logger
from .models import MlpModel, AdamWState, entropy_bits


class AcquisitionRequest:
    """
    Everything a query strategy may look at: the trained main model, features and ids of the labeled set
    and features and ids of the unlabeled pool. Labels of the unlabeled pool are deliberately not part of it.
    """
    model: MlpModel
    labeled_features: np.ndarray
    labeled_ids: np.ndarray
    unlabeled_features: np.ndarray
    unlabeled_ids: np.ndarray
    batch_size: int
    strategy: Strategy
    config: ExperimentConfig
    rng: np.random.Generator
    cartography_labels: Optional[CartographyLabels]

    def __init__(
            self,
            model: MlpModel,
            labeled_features: np.ndarray,
            labeled_ids: np.ndarray,
            unlabeled_features: np.ndarray,
            unlabeled_ids: np.ndarray,
            batch_size: int,
            strategy: Strategy,
            config: ExperimentConfig,
            rng: np.random.Generator,
            cartography_labels: Optional[CartographyLabels] = None
    ):
        self.model = model
        self.labeled_features = np.asarray(labeled_features, dtype=np.float64)
        self.labeled_ids = np.asarray(labeled_ids, dtype=np.int64)
        self.unlabeled_features = np.asarray(unlabeled_features, dtype=np.float64)
        self.unlabeled_ids = np.asarray(unlabeled_ids, dtype=np.int64)
        self.batch_size = batch_size
        self.strategy = Strategy(strategy)
        self.config = config
        self.rng = rng
        self.cartography_labels = cartography_labels

    def validate(self) -> None:
        if self.batch_size < 1:
            raise SelectionError(f'Batch size must be positive, got {self.batch_size}')
        if self.batch_size > len(self.unlabeled_ids):
            raise SelectionError(f'Batch size {self.batch_size} exceeds the unlabeled pool '
                                 f'({len(self.unlabeled_ids)} instances)')
        if len(self.labeled_features) != len(self.labeled_ids) \
                or len(self.unlabeled_features) != len(self.unlabeled_ids):
            raise SelectionError('Feature rows and ids of the labeled/unlabeled views must align')
        if len(np.unique(self.unlabeled_ids)) != len(self.unlabeled_ids):
            raise SelectionError('Unlabeled pool contains duplicate ids')
        overlap = np.intersect1d(self.labeled_ids, self.unlabeled_ids)
        if len(overlap) > 0:
            raise SelectionError(f'Labeled and unlabeled sets overlap in {len(overlap)} instances '
                                 f'(e.g. id {overlap[0]})')

    def replace(self, **kwargs) -> 'AcquisitionRequest':
        values = dict(self.__dict__)
        values.update(kwargs)
        return AcquisitionRequest(**values)


class SelectionResult:
    """
    Ordered batch of chosen ids plus the score of every candidate. Candidates are ranked by score (descending,
    or ascending for strategies minimising their score), ties broken by ascending id.
    """
    strategy: Strategy
    ids: np.ndarray
    candidate_ids: np.ndarray
    scores: np.ndarray
    ascending: bool
    fallback: Optional[Strategy]
    discriminator: Optional[MlpModel]

    def __init__(
            self,
            strategy: Strategy,
            ids: np.ndarray,
            candidate_ids: np.ndarray,
            scores: np.ndarray,
            ascending: bool = False,
            fallback: Optional[Strategy] = None,
            discriminator: Optional[MlpModel] = None
    ):
        self.strategy = strategy
        self.ids = ids
        self.candidate_ids = candidate_ids
        self.scores = scores
        self.ascending = ascending
        self.fallback = fallback
        self.discriminator = discriminator

    def __len__(self):
        return len(self.ids)

    def score_table(self, iteration: int) -> pd.DataFrame:
        """Per-candidate scores with a 0/1 flag for the chosen ones"""
        return pd.DataFrame({
            'iteration': iteration,
            'strategy': self.strategy.value,
            'instance_id': self.candidate_ids,
            'score': self.scores,
            'selected': np.isin(self.candidate_ids, self.ids).astype(np.int64)
        })


def rank_candidates(ids: np.ndarray, scores: np.ndarray, ascending: bool = False) -> np.ndarray:
    """
    Full ranking of the candidate ids by score, ties broken by ascending id
    """
    ids = np.asarray(ids)
    scores = np.asarray(scores, dtype=np.float64)
    # lexsort sorts by the last key first
    order = np.lexsort((ids, scores if ascending else -scores))
    return ids[order]


def top_k(strategy: Strategy, req: AcquisitionRequest, scores: np.ndarray, ascending: bool = False,
          discriminator: Optional[MlpModel] = None) -> SelectionResult:
    ranking = rank_candidates(req.unlabeled_ids, scores, ascending)
    logger.debug(f'{strategy} selected {req.batch_size} of {len(req.unlabeled_ids)} candidates')
    return SelectionResult(strategy, ranking[:req.batch_size], req.unlabeled_ids, scores, ascending,
                           discriminator=discriminator)


def select_random(req: AcquisitionRequest) -> SelectionResult:
    req.validate()
    # Ranking by i.i.d. uniform keys is a uniform sample without replacement
    scores = req.rng.random(len(req.unlabeled_ids))
    return top_k(Strategy.random, req, scores)


def select_least_confidence(req: AcquisitionRequest) -> SelectionResult:
    req.validate()
    distribution = req.model.predict(req.unlabeled_features)
    return top_k(Strategy.least_confidence, req, 1.0 - distribution.max_probability)


def select_max_entropy(req: AcquisitionRequest) -> SelectionResult:
    req.validate()
    distribution = req.model.predict(req.unlabeled_features)
    return top_k(Strategy.max_entropy, req, distribution.entropy())


def select_bald(req: AcquisitionRequest) -> SelectionResult:
    """
    Entropy of the mean Monte Carlo dropout distribution, or (with bald_mutual_information) the mutual
    information between predictions and weights: H(mean) - mean(H(pass))
    """
    req.validate()
    passes = req.config.mc_passes
    if req.config.bald_mutual_information:
        stacked = req.model.mc_dropout_passes(req.unlabeled_features, passes, req.rng)
        scores = entropy_bits(np.mean(stacked, axis=0)) - np.mean(entropy_bits(stacked), axis=0)
    else:
        scores = req.model.mc_dropout_predict(req.unlabeled_features, passes, req.rng).entropy()

    return top_k(Strategy.bald, req, scores)


def train_discriminator(features: np.ndarray, labels: np.ndarray, config: ExperimentConfig,
                        rng: np.random.Generator) -> MlpModel:
    """
    Train a fresh binary classifier on representations of the main model
    :param features: Representations, one row per instance
    :param labels: Binary targets
    :param config: Experiment config (discriminator architecture and optimizer settings)
    :param rng: Generator used for initialization, shuffling and dropout
    :return: Trained discriminator
    """
    discriminator = MlpModel(
        features.shape[1],
        2,
        rng,
        Architecture.binary,
        config.hidden_dim,
        config.discriminator_hidden_layers,
        config.dropout
    )
    optimizer = AdamWState(
        discriminator,
        config.discriminator_learning_rate,
        config.beta1,
        config.beta2,
        config.adam_epsilon,
        config.weight_decay
    )
    for epoch in range(config.discriminator_epochs):
        discriminator.train_epoch(optimizer, features, labels, config.discriminator_batch_size, rng, epoch)

    return discriminator


def select_dal(req: AcquisitionRequest) -> SelectionResult:
    req.validate()
    if len(req.labeled_ids) == 0 or len(req.unlabeled_ids) == 0:
        raise SelectionError(f'Discriminative selection needs both sets to be non-empty '
                             f'(labeled: {len(req.labeled_ids)}, unlabeled: {len(req.unlabeled_ids)})')

    labeled_representation = req.model.representation(req.labeled_features)
    unlabeled_representation = req.model.representation(req.unlabeled_features)

    # Optionally train on a subsample of the unlabeled pool, all of it is scored regardless
    training_unlabeled = unlabeled_representation
    limit = req.config.dal_unlabeled_limit
    if 0 < limit < len(unlabeled_representation):
        subsample = np.sort(req.rng.choice(len(unlabeled_representation), size=limit, replace=False))
        training_unlabeled = unlabeled_representation[subsample]

    features = np.vstack([labeled_representation, training_unlabeled])
    labels = np.concatenate([
        np.full(len(labeled_representation), DISCRIMINATOR_LABELED),
        np.full(len(training_unlabeled), DISCRIMINATOR_UNLABELED)
    ])
    discriminator = train_discriminator(features, labels, req.config, req.rng)

    scores = discriminator.predict(unlabeled_representation).probabilities[:, DISCRIMINATOR_UNLABELED]
    return top_k(Strategy.dal, req, scores, discriminator=discriminator)


def select_cal(req: AcquisitionRequest) -> SelectionResult:
    """
    Train a discriminator to tell high-cor from low-cor labeled instances, then pick the unlabeled instances
    it is least certain about (P(high-cor) closest to 0.5)
    """
    req.validate()
    labels = req.cartography_labels
    if labels is None:
        raise SelectionError('Cartography selection requires cartography labels for the labeled set')
    if not np.array_equal(labels.ids, req.labeled_ids):
        raise SelectionError('Cartography labels are not aligned with the labeled set ids')
    if labels.is_degenerate:
        raise DegenerateLabelsError(f'All {len(labels)} labeled instances share cartography label '
                                    f'{labels.labels[0] if len(labels) > 0 else None} '
                                    f'(t_cor = {labels.threshold})')

    discriminator = train_discriminator(req.model.representation(req.labeled_features), labels.labels,
                                        req.config, req.rng)

    high_cor = discriminator.predict(req.model.representation(req.unlabeled_features)).probabilities[:, 1]
    return top_k(Strategy.cal, req, np.abs(0.5 - high_cor), ascending=True, discriminator=discriminator)


def combine_rankings(first: np.ndarray, second: np.ndarray, first_quota: int) -> np.ndarray:
    """
    Merge two rankings: the top `first_quota` of `first`, followed by `second` without anything already taken
    (and, should `second` not cover everything, the remainder of `first`)
    """
    head = list(first[:first_quota])
    taken = set(head)
    for candidate in list(second) + list(first[first_quota:]):
        if candidate not in taken:
            head.append(candidate)
            taken.add(candidate)

    return np.asarray(head, dtype=np.int64)


def select_hybrid_dal_cal(req: AcquisitionRequest) -> SelectionResult:
    """
    Split the batch between both discriminators: DAL contributes its top floor(k/2), CAL fills the remaining
    ceil(k/2) slots with its best candidates not already chosen
    """
    req.validate()
    everything = req.replace(batch_size=len(req.unlabeled_ids))
    dal = select_dal(everything)
    fallback = None
    try:
        cal = select_cal(everything)
    except DegenerateLabelsError as e:
        logger.warning(f'Degenerate cartography labels in hybrid selection, using least confidence for the '
                       f'cartography half ({e})')
        cal = select_least_confidence(everything)
        fallback = Strategy.least_confidence

    ranking = combine_rankings(dal.ids, cal.ids, req.batch_size // 2)
    # Scores encode the merged ranking, so higher means chosen earlier
    position = {candidate: rank for rank, candidate in enumerate(ranking)}
    scores = np.asarray([len(ranking) - position[candidate] for candidate in req.unlabeled_ids], dtype=np.float64)

    return SelectionResult(Strategy.dal_cal, ranking[:req.batch_size], req.unlabeled_ids, scores,
                           fallback=fallback)


SELECTORS: Dict[Strategy, Callable[[AcquisitionRequest], SelectionResult]] = {
    Strategy.random: select_random,
    Strategy.least_confidence: select_least_confidence,
    Strategy.max_entropy: select_max_entropy,
    Strategy.bald: select_bald,
    Strategy.dal: select_dal,
    Strategy.cal: select_cal,
    Strategy.dal_cal: select_hybrid_dal_cal,
}


def select_batch(req: AcquisitionRequest) -> SelectionResult:
    """
    Run the strategy of the request. Cartography selection on degenerate labels (every labeled
    instance high-cor or every one low-cor) falls back to least confidence for this call.
    """
    try:
        result = SELECTORS[req.strategy](req)
    except DegenerateLabelsError as e:
        logger.warning(f'Falling back to least confidence for this batch ({e})')
        result = select_least_confidence(req)
        result.strategy = req.strategy
        result.fallback = Strategy.least_confidence

    return result
