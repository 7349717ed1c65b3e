import hashlib
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Type, Union

from .constants import Strategy, Featurizer, DatamapSplit, BonferroniMode, AsoMode, Profile, DatasetFormat, \
    PROFILES, DEFAULT_SEEDS, DEFAULT_THRESHOLDS, SYNTHETIC_DATASET, ENCODING, HIDDEN_DIM
from .exceptions import ConfigError
from .logger import logger


class ListOf:
    """Parse target for comma-separated values"""
    item: Callable[[str], Any]

    def __init__(self, item: Callable[[str], Any]):
        self.item = item


ParseTarget = Union[Type[str], Type[int], Type[float], Type[bool], Type[Enum], ListOf]

"""
Every config key with its parse target. The keys are exactly the attributes of ExperimentConfig, anything else
found in a config file (or passed as an override) is rejected.
"""
CONFIG_PARSE_MAP: Dict[str, ParseTarget] = {
    # Dataset and featurization
    'dataset': str,
    'test_dataset': str,
    'dataset_format': str,
    'embeddings': str,
    'featurizer': Featurizer,
    'max_length': int,
    'hash_dim': int,
    'hash_seed': int,
    'synthetic_size': int,
    'synthetic_test_size': int,
    'synthetic_classes': int,
    'synthetic_features': int,
    'synthetic_spread': float,
    'synthetic_seed': int,
    'profile': str,
    # Active learning loop
    'seed_size': int,
    'batch_size': int,
    'iterations': int,
    'budget': int,
    'seeds': ListOf(int),
    'strategies': ListOf(Strategy),
    # Main classifier
    'epochs': int,
    'train_batch_size': int,
    'hidden_dim': int,
    'hidden_layers': int,
    'dropout': float,
    'learning_rate': float,
    'beta1': float,
    'beta2': float,
    'adam_epsilon': float,
    'weight_decay': float,
    # Binary discriminator
    'discriminator_hidden_layers': int,
    'discriminator_epochs': int,
    'discriminator_learning_rate': float,
    'discriminator_batch_size': int,
    'dal_unlabeled_limit': int,
    # Strategy parameters
    't_cor': float,
    'mc_passes': int,
    'bald_mutual_information': bool,
    'datamap_epochs': int,
    # Data map command
    'datamap_split': DatamapSplit,
    'datamap_train_epochs': int,
    # Significance testing
    'alpha': float,
    'bootstrap_iterations': int,
    'aso_samples': int,
    'bonferroni': BonferroniMode,
    'aso_mode': AsoMode,
    # Analyses
    'sweep_thresholds': ListOf(float),
    'score_tables': bool,
}

CONFIG_DEFAULTS: Dict[str, Any] = {
    'dataset': '',
    'test_dataset': '',
    'dataset_format': '',
    'embeddings': '',
    'featurizer': Featurizer.hashed,
    'max_length': 200,
    'hash_dim': HIDDEN_DIM,
    'hash_seed': 0,
    'synthetic_size': 2000,
    'synthetic_test_size': 500,
    'synthetic_classes': 4,
    'synthetic_features': 20,
    'synthetic_spread': 1.0,
    'synthetic_seed': 0,
    'profile': '',
    'seed_size': 500,
    'batch_size': 50,
    'iterations': 30,
    'budget': 0,
    'seeds': list(DEFAULT_SEEDS),
    'strategies': [Strategy.cal],
    'epochs': 30,
    'train_batch_size': 16,
    'hidden_dim': HIDDEN_DIM,
    'hidden_layers': 3,
    'dropout': 0.3,
    'learning_rate': 1e-4,
    'beta1': 0.9,
    'beta2': 0.999,
    'adam_epsilon': 1e-8,
    'weight_decay': 0.01,
    'discriminator_hidden_layers': 1,
    'discriminator_epochs': 30,
    'discriminator_learning_rate': 5e-5,
    'discriminator_batch_size': 64,
    'dal_unlabeled_limit': 0,
    't_cor': 0.2,
    'mc_passes': 10,
    'bald_mutual_information': False,
    'datamap_epochs': 0,
    'datamap_split': DatamapSplit.seed,
    'datamap_train_epochs': 10,
    'alpha': 0.05,
    'bootstrap_iterations': 1000,
    'aso_samples': 1000,
    'bonferroni': BonferroniMode.ordered,
    'aso_mode': AsoMode.pooled,
    'sweep_thresholds': list(DEFAULT_THRESHOLDS),
    'score_tables': False,
}


class ExperimentConfig:
    dataset: str
    test_dataset: str
    dataset_format: str
    embeddings: str
    featurizer: Featurizer
    max_length: int
    hash_dim: int
    hash_seed: int
    synthetic_size: int
    synthetic_test_size: int
    synthetic_classes: int
    synthetic_features: int
    synthetic_spread: float
    synthetic_seed: int
    profile: str
    seed_size: int
    batch_size: int
    iterations: int
    budget: int
    seeds: List[int]
    strategies: List[Strategy]
    epochs: int
    train_batch_size: int
    hidden_dim: int
    hidden_layers: int
    dropout: float
    learning_rate: float
    beta1: float
    beta2: float
    adam_epsilon: float
    weight_decay: float
    discriminator_hidden_layers: int
    discriminator_epochs: int
    discriminator_learning_rate: float
    discriminator_batch_size: int
    dal_unlabeled_limit: int
    t_cor: float
    mc_passes: int
    bald_mutual_information: bool
    datamap_epochs: int
    datamap_split: DatamapSplit
    datamap_train_epochs: int
    alpha: float
    bootstrap_iterations: int
    aso_samples: int
    bonferroni: BonferroniMode
    aso_mode: AsoMode
    sweep_thresholds: List[float]
    score_tables: bool

    def __init__(self, **kwargs: Any):
        for key, value in CONFIG_DEFAULTS.items():
            setattr(self, key, list(value) if isinstance(value, list) else value)
        self.update(**kwargs)

    @classmethod
    def from_text(cls, text: str, overrides: Iterable[str] = ()) -> 'ExperimentConfig':
        """
        Parse a flat key = value config, then apply any "key=value" overrides on top
        :param text: Config file content ("#" starts a comment)
        :param overrides: Override assignments, applied after the file content
        :return: Parsed config (not yet validated)
        """
        pairs = [cls.split_assignment(line, number) for number, line in enumerate(text.splitlines(), start=1)]
        pairs = [pair for pair in pairs if pair is not None]
        pairs.extend(cls.split_assignment(override) for override in overrides)

        parsed = [(key, cls.parse_value(key, raw)) for key, raw in pairs]

        self = cls()
        # Profile presets act as defaults, so they need to be in place before any explicitly configured key
        for key, value in parsed:
            if key == 'profile' and value != '':
                self.apply_profile(value)
        for key, value in parsed:
            setattr(self, key, value)

        return self

    @classmethod
    def from_file(cls, path: Union[str, Path], overrides: Iterable[str] = ()) -> 'ExperimentConfig':
        try:
            text = Path(path).read_text(encoding=ENCODING)
        except OSError as e:
            raise ConfigError(f'Failed to read config file {path} ({e})') from None

        return cls.from_text(text, overrides)

    @staticmethod
    def split_assignment(line: str, number: Optional[int] = None) -> Optional[Tuple[str, str]]:
        content = line.split('#', 1)[0].strip()
        if content == '':
            return None

        key, separator, raw = content.partition('=')
        if separator == '':
            location = f' (line {number})' if number is not None else ''
            raise ConfigError(f'Expected "key = value"{location}, got: {line.strip()}')

        return key.strip(), raw.strip()

    @staticmethod
    def parse_value(key: str, raw: str) -> Any:
        target = CONFIG_PARSE_MAP.get(key)
        if target is None:
            raise ConfigError(f'Unknown config key: {key}')

        try:
            if isinstance(target, ListOf):
                return [target.item(item.strip()) for item in raw.split(',') if item.strip() != '']
            if target is bool:
                return ExperimentConfig.str_to_bool(raw)
            return target(raw)
        except ValueError as e:
            raise ConfigError(f'Invalid value for config key {key}: {raw!r} ({e})') from None

    @staticmethod
    def str_to_bool(value: str) -> bool:
        if value.lower() in ['1', 'yes', 'true']:
            return True
        if value.lower() in ['0', 'no', 'false', '']:
            return False

        # Raise error to adhere to behaviour of other parse targets
        raise ValueError(f'could not convert string to bool: \'{value}\'')

    @staticmethod
    def format_value(value: Any) -> str:
        if isinstance(value, list):
            return ','.join(map(ExperimentConfig.format_value, value))
        if isinstance(value, Enum):
            return str(value.value)
        if isinstance(value, bool):
            return 'true' if value else 'false'
        return str(value)

    def apply_profile(self, name: str) -> None:
        try:
            profile = Profile(name)
        except ValueError:
            raise ConfigError(f'Unknown profile for config key profile: {name}') from None

        logger.debug(f'Applying {profile.value} profile presets')
        self.update(**PROFILES[profile])

    def update(self, **kwargs: Any) -> None:
        for key, value in kwargs.items():
            if key not in CONFIG_PARSE_MAP:
                raise ConfigError(f'Unknown config key: {key}')
            setattr(self, key, value)

    def replace(self, **kwargs: Any) -> 'ExperimentConfig':
        copy = ExperimentConfig(**self.as_dict())
        copy.update(**kwargs)
        return copy

    def as_dict(self) -> Dict[str, Any]:
        return {
            key: list(getattr(self, key)) if isinstance(getattr(self, key), list) else getattr(self, key)
            for key in CONFIG_PARSE_MAP
        }

    def to_text(self) -> str:
        return ''.join(f'{key} = {self.format_value(value)}\n' for key, value in self.as_dict().items())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode(ENCODING)).hexdigest()[:12]

    @property
    def effective_budget(self) -> int:
        """Total budget K = k * n"""
        return self.batch_size * self.iterations

    @property
    def is_synthetic(self) -> bool:
        return self.dataset == SYNTHETIC_DATASET

    def validate(self) -> None:
        """
        Validate everything that can be checked without loading the dataset (shared by "run" and "validate-config")
        """
        if self.dataset == '':
            raise ConfigError('Missing required config key: dataset')
        if not self.is_synthetic and self.test_dataset == '':
            raise ConfigError('Missing required config key: test_dataset')
        if self.dataset_format not in ['', *[f.value for f in DatasetFormat]]:
            raise ConfigError(f'Invalid value for config key dataset_format: {self.dataset_format}')
        if self.featurizer is Featurizer.embedding and self.embeddings == '':
            raise ConfigError('Config key embeddings is required when featurizer = embedding')
        if self.profile != '' and self.profile not in [p.value for p in Profile]:
            raise ConfigError(f'Unknown profile for config key profile: {self.profile}')

        self.require_positive('max_length', 'hash_dim', 'seed_size', 'batch_size', 'iterations', 'epochs',
                              'train_batch_size', 'hidden_dim', 'hidden_layers', 'discriminator_hidden_layers',
                              'discriminator_epochs', 'discriminator_batch_size', 'mc_passes',
                              'datamap_train_epochs', 'aso_samples', 'synthetic_size', 'synthetic_test_size',
                              'synthetic_features')
        self.require_positive('learning_rate', 'discriminator_learning_rate', 'adam_epsilon', 'synthetic_spread')

        if self.hash_dim < 2:
            raise ConfigError('Config key hash_dim must be at least 2')
        if self.synthetic_classes < 2:
            raise ConfigError('Config key synthetic_classes must be at least 2')
        if self.budget != 0 and self.budget != self.effective_budget:
            raise ConfigError(f'Config key budget ({self.budget}) must equal batch_size * iterations '
                              f'({self.effective_budget})')
        if len(self.seeds) == 0:
            raise ConfigError('Config key seeds must list at least one seed')
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError('Config key seeds must not contain duplicates')
        if any(seed < 0 for seed in self.seeds):
            raise ConfigError('Config key seeds must only contain non-negative seeds')
        if len(self.strategies) == 0:
            raise ConfigError('Config key strategies must list at least one strategy')
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError('Config key strategies must not contain duplicates')
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError('Config key dropout must be in [0, 1)')
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigError('Config keys beta1 and beta2 must be in [0, 1)')
        if self.weight_decay < 0.0:
            raise ConfigError('Config key weight_decay must not be negative')
        if not 0.0 <= self.t_cor < 1.0:
            raise ConfigError('Config key t_cor must be in [0, 1)')
        if any(not 0.0 <= threshold < 1.0 for threshold in self.sweep_thresholds):
            raise ConfigError('Config key sweep_thresholds must only contain values in [0, 1)')
        if not 0 <= self.datamap_epochs <= self.epochs:
            raise ConfigError('Config key datamap_epochs must be in [0, epochs]')
        if self.dal_unlabeled_limit < 0:
            raise ConfigError('Config key dal_unlabeled_limit must not be negative')
        if not 0.0 < self.alpha <= 0.5:
            raise ConfigError('Config key alpha must be in (0, 0.5]')
        if self.bootstrap_iterations < 100:
            raise ConfigError('Config key bootstrap_iterations must be at least 100')

    def require_positive(self, *keys: str) -> None:
        for key in keys:
            if getattr(self, key) <= 0:
                raise ConfigError(f'Config key {key} must be positive')

    def validate_against_pool(self, train_size: int, num_classes: int) -> None:
        """
        Validate the pool-dependent invariants once the dataset has been loaded
        :param train_size: Number of instances in the train pool
        :param num_classes: Number of classes in the train pool
        """
        if self.seed_size > train_size:
            raise ConfigError(f'Config key seed_size ({self.seed_size}) exceeds the train pool size ({train_size})')
        if self.seed_size < num_classes:
            raise ConfigError(f'Config key seed_size ({self.seed_size}) is smaller than the number of classes '
                              f'({num_classes}), cannot stratify')
        if self.seed_size + self.effective_budget > train_size:
            raise ConfigError(f'Config key budget ({self.effective_budget}) exceeds the unlabeled pool size '
                              f'({train_size - self.seed_size})')

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExperimentConfig) and other.as_dict() == self.as_dict()

    def __repr__(self):
        return f'ExperimentConfig({self.as_dict()})'
