"""Descent: repeated best-first descents to terminal positions with max^n backing.

Each descent starts at the root, expands any unexpanded node on its way
(valuing the children with the evaluator, or exactly when terminal) and
steps to the child that is best for the player to move, until the game ends.
The values along the path are then recomputed bottom-up.

A node whose subtree has been expanded all the way to terminal positions is
*exhausted*: its value is exact, so descents step to the best child that is
not exhausted. Once the root is exhausted the search stops early and the root
value is the exact max^n value.

The evaluator is any object with ``values(states) -> (B, num_players)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..engine import GameState, Move
from .common import MAX_SCORE, maxn_child


@dataclass
class DescentConfig:
    budget: int = 180
    exploration_epsilon: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0.0 <= self.exploration_epsilon <= 1.0:
            raise ValueError("exploration_epsilon must be in [0, 1]")


class DescentNode:
    __slots__ = ("state", "value", "children", "expanded", "terminal", "exhausted")

    def __init__(self, state: GameState, value: np.ndarray | None = None):
        self.state = state
        self.terminal = state.is_terminal()
        self.value = state.score().astype(float) if self.terminal else value
        self.children: dict[Move, DescentNode] = {}
        self.expanded = False
        self.exhausted = self.terminal

    def walk(self):
        yield self
        for c in self.children.values():
            yield from c.walk()


def _back_up(node: DescentNode) -> None:
    kids = list(node.children.values())
    node.value = kids[maxn_child([k.value for k in kids], node.state.to_move)].value
    node.exhausted = all(k.exhausted for k in kids)


def expand(node: DescentNode, evaluator) -> None:
    """Create and value all children, then set the node value to the mover-best child."""
    if node.terminal or node.expanded:
        raise ValueError("expand needs an unexpanded non-terminal node")
    children = {m: DescentNode(node.state.play(m)) for m in node.state.legal_moves()}
    pending = [c for c in children.values() if not c.terminal]
    if pending:
        values = np.asarray(evaluator.values([c.state for c in pending]), dtype=float)
        for c, v in zip(pending, np.clip(values, 0.0, MAX_SCORE)):
            c.value = v
    node.children = children
    node.expanded = True
    _back_up(node)


def descent_once(root: DescentNode, evaluator, max_expansions: int | None = None) -> int:
    """One descent from ``root`` towards the end of the game; returns expansions used."""
    if root.terminal:
        raise ValueError("descent from a terminal node")
    path, node, used = [root], root, 0
    while not node.terminal:
        if not node.expanded:
            if max_expansions is not None and used >= max_expansions:
                break
            expand(node, evaluator)
            used += 1
        if node.exhausted:
            break
        open_moves = [m for m, c in node.children.items() if not c.exhausted]
        best = maxn_child([node.children[m].value for m in open_moves], node.state.to_move)
        node = node.children[open_moves[best]]
        path.append(node)
    for n in reversed(path):
        if n.expanded:
            _back_up(n)
    return used


def best_move(root: DescentNode) -> Move:
    moves = list(root.children)
    return moves[maxn_child([root.children[m].value for m in moves], root.state.to_move)]


def search(state: GameState, evaluator,
           config: DescentConfig = DescentConfig()) -> tuple[Move, DescentNode]:
    """Descents until ``config.budget`` expansions are spent or the root is exhausted."""
    if state.is_terminal():
        raise ValueError("search on a terminal state")
    root = DescentNode(state)
    spent = 0
    while spent < config.budget and not root.exhausted:
        spent += descent_once(root, evaluator, config.budget - spent)
    return best_move(root), root


def count_expansions(root: DescentNode) -> int:
    return sum(1 for n in root.walk() if n.expanded)


def collect_targets(tree: DescentNode, encode_fn: Callable | None = None,
                    include_terminal: bool = False) -> list[tuple[object, np.ndarray]]:
    """(encoding, backed value) for every expanded node, optionally terminal ones too."""
    if encode_fn is None:
        from ..network import encode as encode_fn
    out = []
    for n in tree.walk():
        if n.expanded or (include_terminal and n.terminal):
            out.append((encode_fn(n.state), np.array(n.value, dtype=float)))
    return out
