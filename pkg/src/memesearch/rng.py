"""Seeded random generators with stable per-purpose streams.

Every source of randomness in the toolkit flows from one user-supplied
integer seed.  Each consumer asks for a named stream, so adding a new
consumer never shifts the draws seen by existing ones.
"""

import numpy as np

# Stable numeric ids per purpose.  Append only; never renumber.
_STREAMS = {
    "undersample": 1,
    "folds": 2,
    "split": 3,
    "init": 4,
    "shuffle": 5,
    "negatives": 6,
    "svm": 7,
    "eval": 8,
}

DEFAULT_SEED = 20190510


def stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for the named stream; `index` separates repeated uses
    (e.g. one stream per resample or per epoch)."""
    return np.random.default_rng([int(seed), _STREAMS[name], int(index)])
