"""
harness/rng.py

Named, counter-based random streams.

A master seed is split into four streams (policy, resample, adversary,
context). Each stream owns a Philox key; every individual draw gets a fresh
Generator whose counter encodes (purpose, k, round), so a draw never depends
on how many numbers other draws consumed.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

STREAMS = ("policy", "resample", "adversary", "context")

# purpose codes, stored in the Philox counter
PLAY = 0
RESAMPLE_CONTEXT = 1
RESAMPLE_ACTION = 2
EVAL = 3
DIAGNOSTIC = 4
INIT = 5


@dataclass(frozen=True)
class RngStreams:
    """
    Stream factory for one run.

    Args:
        master: Master seed (unsigned 64-bit)
        overrides: Optional per-stream seeds replacing the master for that stream

    Examples:
        >>> streams = RngStreams(7)
        >>> a = streams.generator("policy", PLAY, round=3).random()
        >>> a == RngStreams(7).generator("policy", PLAY, round=3).random()
        True
    """

    master: int
    overrides: Dict[str, Optional[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.master < 0:
            raise ValueError(f"seeds must be unsigned, got {self.master}")
        unknown = set(self.overrides) - set(STREAMS)
        if unknown:
            raise ValueError(f"unknown RNG streams: {sorted(unknown)}")

    def seed_of(self, name: str) -> int:
        if name not in STREAMS:
            raise ValueError(f"unknown RNG stream: {name!r}")
        seed = self.overrides.get(name)
        return self.master if seed is None else int(seed)

    def key(self, name: str) -> np.ndarray:
        """Two-word Philox key derived from (seed, stream index)."""
        seq = np.random.SeedSequence([self.seed_of(name), STREAMS.index(name)])
        return seq.generate_state(2, dtype=np.uint64)

    def generator(self, name: str, purpose: int, round: int = 0, k: int = 0) -> np.random.Generator:
        """Independent Generator for one (stream, purpose, round, k) cell."""
        counter = np.array([0, purpose, k, round], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self.key(name), counter=counter))

    def to_dict(self) -> dict:
        return {name: self.seed_of(name) for name in STREAMS} | {"master": self.master}
