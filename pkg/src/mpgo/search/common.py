from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..engine import Move

MAX_SCORE = 25.0


@dataclass
class SearchResult:
    """Root statistics of a finished search."""

    to_move: int
    visits: dict[Move, int]
    mean_scores: dict[Move, np.ndarray]
    root: Any = field(default=None, repr=False)

    def total_visits(self) -> int:
        return sum(self.visits.values())


def most_visited(result: SearchResult) -> Move:
    """Most visits, then higher mean score for the mover, then lowest (row, col)."""
    if not result.visits:
        raise ValueError("empty search result")
    p = result.to_move

    def key(m):
        mean = result.mean_scores.get(m)
        return (-result.visits[m], -(float(mean[p]) if mean is not None else 0.0), m)

    return min(result.visits, key=key)


def maxn_child(values: list[np.ndarray], mover: int) -> int:
    """Index of the vector maximising ``mover``'s component; first index wins ties."""
    best, best_i = None, -1
    for i, v in enumerate(values):
        if best is None or v[mover] > best:
            best, best_i = v[mover], i
    return best_i
