from enum import Enum
from typing import Dict, Tuple, Union


class Strategy(str, Enum):
    random = 'random'
    least_confidence = 'least_confidence'
    max_entropy = 'max_entropy'
    bald = 'bald'
    dal = 'dal'
    cal = 'cal'
    dal_cal = 'dal_cal'

    def __str__(self):
        return self.value


class Mode(str, Enum):
    train = 'train'
    eval = 'eval'


class Architecture(str, Enum):
    main = 'main'
    binary = 'binary'


class Featurizer(str, Enum):
    hashed = 'hashed'
    embedding = 'embedding'


class DatasetFormat(str, Enum):
    jsonl = 'jsonl'
    csv = 'csv'


class Profile(str, Enum):
    trec = 'trec'
    agnews = 'agnews'


class DatamapSplit(str, Enum):
    seed = 'seed'
    train = 'train'


class BonferroniMode(str, Enum):
    ordered = 'ordered'
    unordered = 'unordered'
    none = 'none'


class AsoMode(str, Enum):
    pooled = 'pooled'
    per_iteration = 'per_iteration'


class Region(str, Enum):
    easy = 'easy-to-learn'
    ambiguous = 'ambiguous'
    hard = 'hard-to-learn'
    unassigned = 'unassigned'


ENCODING = 'utf-8'
SYNTHETIC_DATASET = 'synthetic'

HIDDEN_DIM = 300
ARCHITECTURE_DEPTH: Dict[Architecture, int] = {
    Architecture.main: 3,
    Architecture.binary: 1
}

# Discriminator classes used by the labeled-vs-unlabeled task
DISCRIMINATOR_LABELED = 0
DISCRIMINATOR_UNLABELED = 1

DEFAULT_SEEDS: Tuple[int, ...] = (398048, 127003, 259479, 869323, 570852)
DEFAULT_THRESHOLDS: Tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)

# Dataset presets, applied before any explicitly configured key
PROFILES: Dict[Profile, Dict[str, Union[int, float]]] = {
    Profile.trec: {
        'seed_size': 500,
        'train_batch_size': 16,
        'max_length': 42
    },
    Profile.agnews: {
        'seed_size': 1000,
        'train_batch_size': 64,
        'max_length': 200
    }
}

# Matplotlib colormaps: correctness levels are sampled evenly from the first (low to high correctness),
# learning curves cycle through the second
CORRECTNESS_COLORMAP = 'viridis'
CURVE_COLORMAP = 'tab10'

# Float format of every exported table (9 significant digits)
EXPORT_FLOAT_FORMAT = '%.9g'
