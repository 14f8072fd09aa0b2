"""Shared fixtures: tiny frozen datasets reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

from sbcn.data import Dataset

# 4 samples x 2 events; marginals 3/4 and 1/2, conditional P(v1|v0=1) = 2/3.
TOY_CELLS = ((1, 0), (1, 1), (0, 0), (1, 1))

# 6 samples x 3 events with a real chain signal a -> b -> c.
CHAIN_CELLS = (
    (1, 1, 1),
    (1, 1, 0),
    (1, 0, 0),
    (1, 1, 1),
    (0, 0, 0),
    (1, 0, 0),
)


@pytest.fixture
def toy_dataset() -> Dataset:
    return Dataset(
        cells=np.array(TOY_CELLS, dtype=np.uint8),
        event_names=("v0", "v1"),
        sample_ids=("s1", "s2", "s3", "s4"),
    )


@pytest.fixture
def chain_dataset() -> Dataset:
    return Dataset(
        cells=np.array(CHAIN_CELLS, dtype=np.uint8),
        event_names=("a", "b", "c"),
        sample_ids=tuple(f"s{i}" for i in range(1, 7)),
    )
