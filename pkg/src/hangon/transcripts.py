"""Distributions over one agent's outcome sequences."""

from __future__ import annotations

from collections.abc import Mapping
from typing import Iterator

DIST_TOL = 1e-10

Transcript = tuple[str, ...]


class TranscriptDistribution(Mapping):
    """Immutable mapping transcript -> probability, summing to 1 within 1e-10."""

    def __init__(self, probabilities: Mapping[Transcript, float]):
        probs = {tuple(k): float(v) for k, v in probabilities.items()}
        total = sum(probs.values())
        if abs(total - 1.0) > DIST_TOL:
            raise ValueError(f"transcript probabilities sum to {total!r}, not 1")
        if any(p < -DIST_TOL for p in probs.values()):
            raise ValueError("negative transcript probability")
        self._probs = dict(sorted(probs.items()))

    def __getitem__(self, key: Transcript) -> float:
        return self._probs[tuple(key)]

    def __iter__(self) -> Iterator[Transcript]:
        return iter(self._probs)

    def __len__(self) -> int:
        return len(self._probs)

    def __repr__(self) -> str:
        return f"TranscriptDistribution({self._probs!r})"

    def prob(self, key: Transcript) -> float:
        return self._probs.get(tuple(key), 0.0)

    def marginal(self, position: int) -> dict[str, float]:
        out: dict[str, float] = {}
        for key, p in self._probs.items():
            out[key[position]] = out.get(key[position], 0.0) + p
        return out

    def max_difference(self, other: Mapping[Transcript, float]) -> float:
        keys = set(self) | set(other)
        return max((abs(self.prob(k) - other.get(k, 0.0)) for k in keys), default=0.0)
