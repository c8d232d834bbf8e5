"""Matches between search agents, with 95% confidence intervals.

Agents are described by picklable :class:`AgentSpec` values so that matches
can be spread over worker processes; each game is seeded by
``(seed, game index)`` and seating is fixed per match.

Spec strings (used by the command line)::

    uct            uct:n=60,c=0.8
    az:PATH        az:PATH,n=60          AlphaZero checkpoint with PUCT
    descent:PATH   descent:PATH,n=180    Descent checkpoint
    random         human
"""
from __future__ import annotations

import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from multiprocessing import get_context
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .engine import PASS, GameState, IllegalMove, Move, new_game
from .network import AZ, DESCENT, NetworkEvaluator, load_checkpoint
from .search import descent, puct, uct

COLOR_NAMES = ("black", "white", "red")
KINDS = ("uct", AZ, DESCENT, "random", "human")


@dataclass(frozen=True)
class AgentSpec:
    kind: str = "uct"
    checkpoint: str | None = None
    n: int = 180
    c: float = 0.8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.kind in (AZ, DESCENT) and not self.checkpoint:
            raise ValueError(f"{self.kind} agent needs a checkpoint")

    @classmethod
    def parse(cls, text: str, n: int = 180, c: float = 0.8) -> "AgentSpec":
        kind, _, rest = text.strip().partition(":")
        kind = kind.lower()
        ckpt = None
        for part in filter(None, rest.split(",")):
            key, eq, val = part.partition("=")
            if not eq:
                ckpt = part
            elif key == "n":
                n = int(val)
            elif key == "c":
                c = float(val)
            else:
                raise ValueError(f"unknown agent option {key!r}")
        return cls(kind, ckpt, n, c)

    def __str__(self):
        if self.kind in ("random", "human"):
            return self.kind
        head = self.kind if self.checkpoint is None else f"{self.kind}:{self.checkpoint}"
        return f"{head},n={self.n}"

    def label(self) -> str:
        return self.kind if self.checkpoint is None else f"{self.kind}:{Path(self.checkpoint).stem}"


@lru_cache(maxsize=8)
def _load_net(path: str, kind: str):
    ck = load_checkpoint(path)
    if ck.net.variant != kind:
        raise ValueError(f"{path} holds a {ck.net.variant} network, not {kind}")
    return ck.net


class Agent:
    def select(self, state: GameState, rng: np.random.Generator) -> Move:
        raise NotImplementedError


class RandomAgent(Agent):
    def select(self, state, rng):
        moves = state.legal_moves()
        return moves[int(rng.integers(len(moves)))]


class UctAgent(Agent):
    def __init__(self, n: int, c: float):
        self.n, self.c = n, c

    def select(self, state, rng):
        res = uct.search(state, uct.UctConfig(self.n, self.c, int(rng.integers(2**63))))
        return uct.select_move(res)


class AzAgent(Agent):
    """Greedy PUCT: most visits, no temperature."""

    def __init__(self, net, n: int, c: float):
        self.evaluator = NetworkEvaluator(net)
        self.config = puct.PuctConfig(n, c, temperature_moves=0)

    def select(self, state, rng):
        res = puct.search(state, self.evaluator, self.config)
        return puct.select_move(res, state.move_count, self.config)


class DescentAgent(Agent):
    def __init__(self, net, n: int):
        self.evaluator = NetworkEvaluator(net)
        self.config = descent.DescentConfig(budget=n)

    def select(self, state, rng):
        return descent.search(state, self.evaluator, self.config)[0]


class HumanAgent(Agent):
    """Reads "r,c" or "pass" until a legal move is entered."""

    def __init__(self, read: Callable[[str], str] = input, write: Callable[[str], None] = print):
        self.read, self.write = read, write

    def select(self, state, rng):
        while True:
            try:
                text = self.read(f"{COLOR_NAMES[state.to_move]} move (r,c or pass): ")
            except EOFError:
                raise KeyboardInterrupt("input closed") from None
            try:
                move = Move.parse(text.strip())
            except ValueError:
                self.write(f"could not parse {text.strip()!r}; enter r,c or pass")
                continue
            reason = state.illegal_reason(move)
            if reason is None:
                return move
            self.write(f"illegal: {reason}")


def make_agent(spec: AgentSpec, read=input, write=print) -> Agent:
    if spec.kind == "uct":
        return UctAgent(spec.n, spec.c)
    if spec.kind == "random":
        return RandomAgent()
    if spec.kind == "human":
        return HumanAgent(read, write)
    if not Path(spec.checkpoint).exists():
        raise FileNotFoundError(f"checkpoint not found: {spec.checkpoint}")
    net = _load_net(str(spec.checkpoint), spec.kind)
    return AzAgent(net, spec.n, spec.c) if spec.kind == AZ else DescentAgent(net, spec.n)


def play_game(agents: Sequence[Agent], rng: np.random.Generator,
              on_move: Callable[[GameState, Move], None] | None = None) -> tuple[np.ndarray, list[Move]]:
    """Play one game from the empty board; forced passes skip the agent."""
    state = new_game(len(agents), 5)
    moves = []
    while not state.is_terminal():
        legal = state.legal_moves()
        move = PASS if legal == [PASS] else agents[state.to_move].select(state, rng)
        state = state.play(move)
        moves.append(move)
        if on_move is not None:
            on_move(state, move)
    return state.score(), moves


@dataclass
class MatchSpec:
    agents: tuple[AgentSpec, ...]
    n_games: int = 500
    seed: int = 0

    def __post_init__(self):
        self.agents = tuple(self.agents)
        if len(self.agents) != 3:
            raise ValueError("a match needs exactly three agent specs")
        if self.n_games < 1:
            raise ValueError("n_games must be at least 1")


@dataclass
class MatchReport:
    scores: np.ndarray  # (n_games, 3)
    agents: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.scores)

    @property
    def means(self) -> np.ndarray:
        return self.scores.mean(axis=0)

    @property
    def ci95(self) -> np.ndarray | None:
        if self.n < 2:
            return None
        return 1.96 * self.scores.std(axis=0, ddof=1) / math.sqrt(self.n)

    @property
    def wins(self) -> np.ndarray:
        """Highest score wins; ties split the win."""
        top = self.scores == self.scores.max(axis=1, keepdims=True)
        return (top / top.sum(axis=1, keepdims=True)).sum(axis=0)

    def rows(self):
        ci = self.ci95
        return [{"color": COLOR_NAMES[i], "mean": float(self.means[i]),
                 "ci95": None if ci is None else float(ci[i]), "n": self.n} for i in range(3)]

    def format(self) -> str:
        ci = self.ci95
        cells = [f"{COLOR_NAMES[i]:>5} {self.means[i]:5.2f}" + ("" if ci is None else f" ± {ci[i]:.2f}")
                 for i in range(3)]
        return "  ".join(cells) + f"  (n={self.n})"


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def write_csv(path, header: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) if isinstance(r[h], float) or r[h] is None else r[h] for h in header])


def _play_games(spec: MatchSpec, indices: list[int]) -> list[np.ndarray]:
    import torch
    torch.set_num_threads(1)
    agents = [make_agent(a) for a in spec.agents]
    return [play_game(agents, np.random.default_rng([spec.seed, i]))[0] for i in indices]


def run_match(spec: MatchSpec, workers: int = 1,
              progress: Callable[[int, np.ndarray], None] | None = None) -> MatchReport:
    """Play ``spec.n_games`` games with fixed seating; results do not depend on ``workers``."""
    if any(a.kind == "human" for a in spec.agents):
        raise ValueError("use play_interactive for matches with a human seat")
    for a in spec.agents:
        if a.checkpoint is not None and not Path(a.checkpoint).exists():
            raise FileNotFoundError(f"checkpoint not found: {a.checkpoint}")
    indices = list(range(spec.n_games))
    if workers <= 1:
        agents = [make_agent(a) for a in spec.agents]
        scores = []
        for i in indices:
            scores.append(play_game(agents, np.random.default_rng([spec.seed, i]))[0])
            if progress is not None:
                progress(i, scores[-1])
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(workers, mp_context=get_context("spawn")) as pool:
            parts = list(pool.map(_play_games, [spec] * workers, chunks))
        by_index = {}
        for chunk, res in zip(chunks, parts):
            by_index.update(zip(chunk, res))
        scores = [by_index[i] for i in indices]
    return MatchReport(np.array(scores, dtype=float).reshape(-1, 3),
                       tuple(a.label() for a in spec.agents))


CURVE_HEADER = ("checkpoint_id", "seat", "mean", "ci95", "n")
CROSS_HEADER = ("black_agent", "defender", "mean", "ci95", "n")
MATCH_HEADER = ("color", "mean", "ci95", "n")


def evaluation_checkpoints(run_dir) -> list[Path]:
    paths = sorted((Path(run_dir) / "eval").glob("*.ckpt"))
    if not paths:
        raise FileNotFoundError(f"no evaluation checkpoints under {run_dir}")
    return paths


def learning_curve(run_dir, opponent: AgentSpec, games_per_point: int, seed: int = 0,
                   n: int | None = None, seats: Sequence[int] = (0, 1, 2), workers: int = 1,
                   out: str | Path | None = None) -> list[dict]:
    """Each evaluation checkpoint in each seat against ``opponent`` elsewhere."""
    rows = []
    for path in evaluation_checkpoints(run_dir):
        variant = load_checkpoint(path).net.variant
        learner = AgentSpec(variant, str(path), n if n is not None else opponent.n, opponent.c)
        for seat in seats:
            agents = [opponent] * 3
            agents[seat] = learner
            rep = run_match(MatchSpec(tuple(agents), games_per_point, seed), workers)
            ci = rep.ci95
            rows.append({"checkpoint_id": path.stem, "seat": COLOR_NAMES[seat],
                         "mean": float(rep.means[seat]), "ci95": None if ci is None else float(ci[seat]),
                         "n": rep.n})
    if out is not None:
        write_csv(out, CURVE_HEADER, rows)
    return rows


def cross_table(uct_spec: AgentSpec, az_checkpoint: str, descent_checkpoint: str, n_games: int,
                seed: int = 0, workers: int = 1, out: str | Path | None = None) -> list[dict]:
    """Black's mean for every Black agent against every defender pair, plus the all-UCT row."""
    learners = {"az": AgentSpec(AZ, az_checkpoint, uct_spec.n, uct_spec.c),
                "descent": AgentSpec(DESCENT, descent_checkpoint, uct_spec.n, uct_spec.c)}
    defenders = {"uct": uct_spec, **learners}
    pairs = [("uct", "uct", uct_spec, uct_spec)]
    pairs += [(b, d, learners[b], defenders[d]) for b in learners for d in defenders]
    rows = []
    for black_name, def_name, black, dfn in pairs:
        rep = run_match(MatchSpec((black, dfn, dfn), n_games, seed), workers)
        ci = rep.ci95
        rows.append({"black_agent": black_name, "defender": def_name, "mean": float(rep.means[0]),
                     "ci95": None if ci is None else float(ci[0]), "n": rep.n})
    if out is not None:
        write_csv(out, CROSS_HEADER, rows)
    return rows


def format_cross_table(rows: Sequence[dict]) -> str:
    defenders = list(dict.fromkeys(r["defender"] for r in rows if r["black_agent"] != "uct"))
    cell = {(r["black_agent"], r["defender"]): r for r in rows}
    width = 16
    lines = ["black \\ defenders".ljust(18) + "".join(d.ljust(width) for d in defenders)]
    for b in dict.fromkeys(r["black_agent"] for r in rows if r["black_agent"] != "uct"):
        line = b.ljust(18)
        for d in defenders:
            r = cell.get((b, d))
            line += ("" if r is None else _cell(r)).ljust(width)
        lines.append(line)
    if ("uct", "uct") in cell:
        lines.append("uct baseline".ljust(18) + _cell(cell["uct", "uct"]))
    return "\n".join(lines)


def _cell(r) -> str:
    return f"{r['mean']:.1f}" + ("" if r["ci95"] is None else f" ± {r['ci95']:.1f}")


def play_interactive(spec: MatchSpec, read: Callable[[str], str] = input,
                     write: Callable[[str], None] = print) -> MatchReport:
    """One game with console rendering; human seats are prompted for moves."""
    agents = [make_agent(a, read, write) for a in spec.agents]
    write(new_game().render())

    def show(state, move):
        who = COLOR_NAMES[(state.to_move - 1) % 3]
        write(f"{who} plays {move}")
        write(state.render())

    scores, _ = play_game(agents, np.random.default_rng([spec.seed, 0]), show)
    write("final score: " + "  ".join(f"{COLOR_NAMES[i]} {int(s)}" for i, s in enumerate(scores)))
    return MatchReport(np.array([scores], dtype=float), tuple(a.label() for a in spec.agents))
