import zlib
from typing import Union

import numpy as np

from .constants import ENCODING
from .logger import logger


def purpose_key(*purpose: Union[str, int]) -> int:
    """
    Stable integer for a purpose tag such as ("acquire", "cal", 3)
    """
    tag = '/'.join(map(str, purpose))
    return zlib.crc32(tag.encode(ENCODING))


def derive_rng(seed: int, *purpose: Union[str, int]) -> np.random.Generator:
    """
    Derive an independent generator for the given seed and purpose tag. Streams only depend on (seed, purpose),
    so adding new purposes (e.g. strategies) never shifts existing ones.
    :param seed: Experiment seed
    :param purpose: Purpose tag elements, joined with "/"
    :return: Seeded numpy generator
    """
    key = purpose_key(*purpose)
    logger.debug(f'Deriving RNG stream for seed {seed}, purpose {"/".join(map(str, purpose))} ({key})')
    return np.random.default_rng(np.random.SeedSequence([seed, key]))
