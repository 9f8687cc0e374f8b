"""Bundled datasets: deterministic benchmarks and tiny verification tables.

``corral`` is the classic 6-feature boolean benchmark with target
(X1 and X2) or (X3 and X4): X5 is pure noise and X6 agrees with the target
75% of the time, so the informative features are X1-X4 and X6 while the
informative interactions are the {X1,X2} and {X3,X4} pairs.  The copy here
is generated without randomness: every (X1..X5) combination appears four
times, with X6 matching the target in exactly three of those four rows.

The tiny binary tables back exact-enumeration checks of the sampler and are
frozen as literals so the reference distributions never move.
"""

from __future__ import annotations

import numpy as np

from .dataio import Dataset

CORRAL_FEATURE_NAMES = ("X1", "X2", "X3", "X4", "X5", "X6")


def corral_rows() -> list:
    """All 128 corral rows as (x1..x6, y) integer tuples."""
    rows = []
    for combo in range(32):
        bits = [(combo >> b) & 1 for b in range(4, -1, -1)]
        x1, x2, x3, x4, x5 = bits
        y = (x1 & x2) | (x3 & x4)
        for copy in range(4):
            x6 = y if copy < 3 else 1 - y
            rows.append((x1, x2, x3, x4, x5, x6, y))
    return rows


def corral_dataset(extra_noise: int = 0, seed: int = 0) -> Dataset:
    """The corral table, optionally widened with shuffled-copy noise columns.

    Each noise column copies a uniformly chosen original feature and
    shuffles its rows, destroying any correlation with the rest.
    """
    rows = np.array(corral_rows(), dtype=np.int64)
    features = rows[:, :6]
    klass = rows[:, 6]
    names = list(CORRAL_FEATURE_NAMES)
    if extra_noise:
        rng = np.random.default_rng(seed)
        cols = [features]
        for i in range(extra_noise):
            src = int(rng.integers(6))
            cols.append(rng.permutation(features[:, src])[:, None])
            names.append(f"X{7 + i}")
        features = np.hstack(cols)
    d = features.shape[1]
    return Dataset(features=features, arities=(2,) * d, klass=klass,
                   class_arity=2, feature_names=tuple(names),
                   cutpoints=((),) * d, class_labels=("0", "1"))


def write_corral_csv(path, extra_noise: int = 0, seed: int = 0) -> None:
    """Write the corral table (original or augmented) as a CSV with header."""
    ds = corral_dataset(extra_noise=extra_noise, seed=seed)
    with open(path, "w") as fh:
        fh.write(",".join(ds.feature_names) + ",class\n")
        for i in range(ds.n):
            cells = [str(v) for v in ds.features[i]] + [str(ds.klass[i])]
            fh.write(",".join(cells) + "\n")


# frozen random binary tables; regenerating them would shift every
# enumeration-based reference value, so they are spelled out
_TINY2_X = (
    (1, 0), (0, 0), (0, 1), (1, 1), (1, 1), (1, 0), (0, 1), (1, 0), (0, 1),
    (0, 0), (1, 0), (1, 1), (0, 0), (0, 0), (1, 1), (1, 1), (1, 1), (1, 1),
    (0, 0), (1, 0),
)
_TINY2_Y = (1, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 1)

_TINY3_X = (
    (0, 1, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0), (1, 0, 1),
    (1, 1, 1), (0, 1, 1), (0, 1, 0), (1, 1, 0), (0, 0, 0), (0, 0, 1),
    (0, 0, 1), (0, 0, 1), (1, 1, 0), (1, 1, 0), (0, 1, 1), (0, 0, 0),
    (0, 1, 0), (0, 0, 0), (0, 0, 1), (1, 1, 1), (0, 0, 1), (0, 0, 0),
    (0, 0, 0), (0, 0, 0), (0, 0, 0), (1, 1, 1), (1, 1, 1), (1, 1, 1),
)
_TINY3_Y = (1, 0, 1, 0, 1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0,
            1, 0, 0, 0, 1, 0, 0, 0, 1, 1)


def tiny_dataset(d: int) -> Dataset:
    """Bundled binary table for exact-posterior checks (d = 2 or 3)."""
    if d == 2:
        x, y = _TINY2_X, _TINY2_Y
    elif d == 3:
        x, y = _TINY3_X, _TINY3_Y
    else:
        raise ValueError("bundled tiny datasets exist for d=2 and d=3 only")
    features = np.array(x, dtype=np.int64)
    return Dataset(features=features, arities=(2,) * d,
                   klass=np.array(y, dtype=np.int64), class_arity=2,
                   feature_names=tuple(f"X{j + 1}" for j in range(d)),
                   cutpoints=((),) * d, class_labels=("0", "1"))


def random_binary_dataset(n: int, d: int, seed: int = 0,
                          signal: int = 2) -> Dataset:
    """Synthetic binary table for scaling and randomized-invariant tests.

    The first ``signal`` features flip the class-1 odds; the rest are
    independent coin flips.
    """
    rng = np.random.default_rng(seed)
    features = rng.integers(0, 2, size=(n, d), dtype=np.int64)
    logit = (features[:, :signal].sum(axis=1) - signal / 2.0) * 1.5
    klass = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    if klass.min() == klass.max():  # force both classes to appear
        klass[0] = 1 - klass[0]
    return Dataset(features=features, arities=(2,) * d, klass=klass,
                   class_arity=2,
                   feature_names=tuple(f"X{j + 1}" for j in range(d)),
                   cutpoints=((),) * d, class_labels=("0", "1"))
