"""Multiplayer UCT with uniform-random playouts.

Every edge keeps the summed score vector of the playouts that went through
it. Selection at a node maximises the UCB1 value of the player to move there,
so the tree behaves like max^n over mean scores.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..engine import GameState, Move
from .common import MAX_SCORE, SearchResult, most_visited

UNVISITED = math.inf


@dataclass
class UctConfig:
    n_rollouts: int = 180
    c: float = 0.8
    rng_seed: int = 0
    q_scale: float = MAX_SCORE

    def __post_init__(self):
        if self.n_rollouts < 1:
            raise ValueError("n_rollouts must be >= 1")
        if self.c < 0:
            raise ValueError("c must be >= 0")


class UctEdge:
    __slots__ = ("move", "visit_count", "score_sum", "child")

    def __init__(self, move: Move, num_players: int):
        self.move = move
        self.visit_count = 0
        self.score_sum = np.zeros(num_players)
        self.child: UctNode | None = None


class UctNode:
    __slots__ = ("state", "visit_count", "edges", "untried", "terminal")

    def __init__(self, state: GameState):
        self.state = state
        # counts the visit that created the node
        self.visit_count = 1
        self.terminal = state.is_terminal()
        moves = [] if self.terminal else state.legal_moves()
        self.edges = {m: UctEdge(m, state.num_players) for m in moves}
        self.untried = list(moves)

    @property
    def to_move(self) -> int:
        return self.state.to_move

    def size(self) -> int:
        return 1 + sum(e.child.size() for e in self.edges.values() if e.child is not None)


def uct_value(edge, parent_visits: int, c: float, mover: int, q_scale: float = MAX_SCORE) -> float:
    if edge.visit_count == 0:
        return UNVISITED
    n = edge.visit_count
    q = edge.score_sum[mover] / (q_scale * n)
    return q + c * math.sqrt(math.log(parent_visits) / n)


def playout(state: GameState, rng: np.random.Generator) -> np.ndarray:
    """Uniform-random legal moves to the end of the game; returns the final scores."""
    return state.playout(int(rng.integers(0, 2**63)))


def _select(node: UctNode, c: float, q_scale: float) -> UctEdge:
    mover = node.to_move
    best, best_v = None, -math.inf
    for e in node.edges.values():
        v = uct_value(e, node.visit_count, c, mover, q_scale)
        if v > best_v:
            best, best_v = e, v
    return best


def search(state: GameState, config: UctConfig = UctConfig(),
           rollout: Callable[[GameState, np.random.Generator], np.ndarray] = playout) -> SearchResult:
    """Run ``config.n_rollouts`` select/expand/playout/backpropagate iterations."""
    if state.is_terminal():
        raise ValueError("search on a terminal state")
    rng = np.random.default_rng(config.rng_seed)
    root = UctNode(state)
    for _ in range(config.n_rollouts):
        node, path = root, []
        while True:
            if node.terminal:
                scores = node.state.score().astype(float)
                break
            if node.untried:
                move = node.untried.pop(int(rng.integers(len(node.untried))))
                edge = node.edges[move]
                edge.child = UctNode(node.state.play(move))
                path.append(edge)
                node = edge.child
                scores = np.asarray(rollout(node.state, rng), dtype=float)
                break
            edge = _select(node, config.c, config.q_scale)
            path.append(edge)
            node = edge.child
            node.visit_count += 1
        root.visit_count += 1
        for edge in path:
            edge.visit_count += 1
            edge.score_sum += scores
    visits = {m: e.visit_count for m, e in root.edges.items() if e.visit_count}
    means = {m: e.score_sum / e.visit_count for m, e in root.edges.items() if e.visit_count}
    return SearchResult(state.to_move, visits, means, root)


def select_move(result: SearchResult) -> Move:
    return most_visited(result)
