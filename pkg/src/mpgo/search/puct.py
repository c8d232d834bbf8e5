"""AlphaZero-style search guided by a policy/value evaluator.

The evaluator is any object with ``evaluate(states) -> (priors, values)``
where ``priors`` is ``(B, size*size)`` over board points and ``values`` is
``(B, num_players)`` expected scores in points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..engine import PASS, GameState, Move
from .common import MAX_SCORE, SearchResult, most_visited


@dataclass
class PuctConfig:
    n_simulations: int = 180
    c_puct: float = 0.8
    temperature_moves: int = 6
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_simulations < 1:
            raise ValueError("n_simulations must be >= 1")


class PuctEdge:
    __slots__ = ("move", "prior", "visit_count", "value_sum", "child")

    def __init__(self, move: Move, prior: float, num_players: int):
        self.move = move
        self.prior = prior
        self.visit_count = 0
        self.value_sum = np.zeros(num_players)
        self.child: PuctNode | None = None


class PuctNode:
    __slots__ = ("state", "edges", "terminal")

    def __init__(self, state: GameState):
        self.state = state
        self.terminal = state.is_terminal()
        self.edges: dict[Move, PuctEdge] | None = None

    @property
    def expanded(self) -> bool:
        return self.edges is not None


def puct_value(edge, parent_visits: int, c_puct: float, mover: int) -> float:
    n = edge.visit_count
    q = edge.value_sum[mover] / (MAX_SCORE * n) if n else 0.0
    return q + c_puct * edge.prior * math.sqrt(parent_visits) / (1 + n)


def masked_priors(state: GameState, policy: np.ndarray) -> dict[Move, float]:
    """Renormalise a point policy over the legal placements (uniform if it has no mass)."""
    moves = state.legal_moves()
    if moves == [PASS]:
        return {PASS: 1.0}
    idx = np.array([m.row * state.size + m.col for m in moves])
    p = np.asarray(policy, dtype=float)[idx]
    total = p.sum()
    p = p / total if total > 0 else np.full(len(moves), 1.0 / len(moves))
    return dict(zip(moves, p.tolist()))


def _select(node: PuctNode, c_puct: float) -> PuctEdge:
    mover = node.state.to_move
    parent = sum(e.visit_count for e in node.edges.values())
    best, best_key = None, None
    for e in node.edges.values():
        key = (puct_value(e, parent, c_puct, mover), e.prior)
        if best_key is None or key > best_key:
            best, best_key = e, key
    return best


def search(state: GameState, evaluator, config: PuctConfig = PuctConfig()) -> SearchResult:
    """Run ``config.n_simulations`` simulations, one leaf evaluation at most each.

    The first simulation evaluates the root itself, so root visits total
    ``n_simulations - 1``.
    """
    if state.is_terminal():
        raise ValueError("search on a terminal state")
    root = PuctNode(state)
    n_players = state.num_players
    for _ in range(config.n_simulations):
        node, path = root, []
        while node.expanded and not node.terminal:
            edge = _select(node, config.c_puct)
            if edge.child is None:
                edge.child = PuctNode(node.state.play(edge.move))
            path.append(edge)
            node = edge.child
        if node.terminal:
            value = node.state.score().astype(float)
        else:
            priors, values = evaluator.evaluate([node.state])
            node.edges = {m: PuctEdge(m, p, n_players)
                          for m, p in masked_priors(node.state, priors[0]).items()}
            value = np.clip(np.asarray(values[0], dtype=float), 0.0, MAX_SCORE)
        for edge in path:
            edge.visit_count += 1
            edge.value_sum += value
    edges = root.edges or {}
    visits = {m: e.visit_count for m, e in edges.items() if e.visit_count}
    if not visits:
        # a single simulation only evaluates the root: fall back to the priors
        m = max(edges, key=lambda k: (edges[k].prior, [-x for x in k]))
        visits = {m: 1}
        means = {m: np.zeros(n_players)}
    else:
        means = {m: edges[m].value_sum / edges[m].visit_count for m in visits}
    return SearchResult(state.to_move, visits, means, root)


def select_move(result: SearchResult, move_number: int, config: PuctConfig,
                rng: np.random.Generator | None = None) -> Move:
    """Sample by visit count during the opening, otherwise the most visited move."""
    if move_number < config.temperature_moves and len(result.visits) > 1:
        if rng is None:
            raise ValueError("sampling phase needs an rng")
        moves = sorted(result.visits)
        counts = np.array([result.visits[m] for m in moves], dtype=float)
        return moves[int(rng.choice(len(moves), p=counts / counts.sum()))]
    return most_visited(result)


def policy_target(result: SearchResult, size: int = 5) -> np.ndarray | None:
    """Root visit distribution over the board points; None when only a pass was searched."""
    target = np.zeros(size * size)
    for m, n in result.visits.items():
        if not m.is_pass:
            target[m.row * size + m.col] += n
    total = target.sum()
    if total == 0:
        return None
    return target / total
