"""
Seed lineages and random generators.

Every random draw in the package comes from a generator derived from a tuple
of integer keys through :class:`numpy.random.SeedSequence`, so equal keys give
bit-identical streams regardless of thread or call order.
"""

import zlib
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

# Domain tags keep the streams of different concerns apart.
INIT = 1
SHUFFLE = 2
TRAIN = 3
VAL = 4
TEST = 5
DATA = 6


class SeedLineage(BaseModel):
    """Identity of one random stream: (master seed, pass index, layer index)."""

    model_config = ConfigDict(frozen=True)

    master_seed: int = Field(ge=0)
    pass_index: int = Field(default=0, ge=0)
    layer_index: int = Field(default=0, ge=0)

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.master_seed, self.pass_index, self.layer_index)


def derive_seed(*keys: int) -> np.random.Generator:
    """Generator keyed by an ordered tuple of non-negative integers."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def lineage_rng(lineage: SeedLineage) -> np.random.Generator:
    return derive_seed(*lineage.as_tuple())


def name_key(name: str) -> int:
    """Stable integer key for a layer or parameter name."""
    return zlib.crc32(name.encode("utf-8"))


def stream_seed(*keys: int) -> int:
    """Master seed of a derived stream, e.g. ``stream_seed(seed, TEST)``."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
