"""Self-play training loop with warm-start UCT mixing.

Each iteration plays ``n_games`` games, where every colour is independently
handed to a UCT agent with probability ``warm_start_epsilon`` and otherwise
played by the learner, appends them to a FIFO replay buffer of whole games,
and trains for one epoch over the buffered positions.

Run directory layout::

    config.json        configuration snapshot
    metrics.csv        iteration, epsilon, mean_loss, buffer_fill, games, positions
    timing.csv         iteration, wall_clock (seconds since start)
    games.jsonl        game records
    latest.ckpt        params + optimizer state after the last iteration
    buffer.npz         replay buffer for resumption
    eval/iter_XXXX.ckpt  evaluation checkpoints (learning curves)

Games are seeded by ``(seed, iteration, game index)`` so results do not depend
on the number of workers.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np
import torch

from .engine import PASS, GameRecord, GameState, new_game, write_records
from .network import (AZ, DESCENT, MultiGoNet, NetworkEvaluator, TrainBatch, encode,
                      load_checkpoint, make_optimizer, save_checkpoint, train_step)
from .search import descent, puct, uct
from .search.common import MAX_SCORE

log = logging.getLogger(__name__)

LEARNER, UCT = "learner", "uct"
METRICS_HEADER = ["iteration", "epsilon", "mean_loss", "buffer_fill", "games", "positions"]


@dataclass
class TrainConfig:
    variant: str = AZ
    n_updates: int = 50
    n_games: int = 1000
    n_envs: int = 8
    buffer_size: int = 2000
    n_rollouts: int = 180
    c: float = 0.8
    seed: int = 0
    wall_clock_limit: float | None = None  # hours
    lr: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 128
    temperature_moves: int = 6
    descent_epsilon: float = 0.05
    warm_start: bool = True
    uct_value_targets: bool = True
    blocks: int = 8
    filters: int = 128
    value_hidden: int = 128
    eval_every: float = 0.1  # fraction of n_updates between evaluation checkpoints

    def __post_init__(self):
        if self.variant not in (AZ, DESCENT):
            raise ValueError(f"variant must be {AZ!r} or {DESCENT!r}")
        for name in ("n_updates", "n_games", "n_envs", "buffer_size", "n_rollouts", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def total_games(self) -> int:
        return self.n_updates * self.n_games


def warm_start_epsilon(iteration: int, n_updates: int) -> float:
    return max(0.5 - iteration / n_updates, 0.05)


def assign_agents(rng: np.random.Generator, epsilon: float, num_players: int = 3) -> tuple[str, ...]:
    return tuple(UCT if rng.random() < epsilon else LEARNER for _ in range(num_players))


@dataclass
class TrainingGame:
    """One self-play game: its record plus per-position training targets."""

    record: GameRecord
    encodings: np.ndarray        # (k, 6, 5, 5) uint8
    values: np.ndarray           # (k, 3) float32, points
    policies: np.ndarray         # (k, 25) float32
    policy_mask: np.ndarray      # (k,) float32; 0 where no policy target exists

    @property
    def n_positions(self) -> int:
        return len(self.encodings)

    @property
    def n_policy_targets(self) -> int:
        return int(self.policy_mask.sum())


def play_training_game(assignment, net: MultiGoNet | None, config: TrainConfig,
                       rng: np.random.Generator) -> TrainingGame:
    """Play one game; learner moves use the network search of ``config.variant``."""
    evaluator = NetworkEvaluator(net) if net is not None else None
    state = new_game(len(assignment), 5)
    moves, stats = [], []
    enc, pol, mask, tree_vals = [], [], [], []
    final_value_rows = []  # rows whose value target is the final score
    pcfg = puct.PuctConfig(config.n_rollouts, config.c, config.temperature_moves)
    while not state.is_terminal():
        legal = state.legal_moves()
        agent = assignment[state.to_move]
        if legal == [PASS]:
            move, stat = PASS, None
        elif agent == UCT:
            res = uct.search(state, uct.UctConfig(config.n_rollouts, config.c,
                                                  int(rng.integers(2**63))))
            move, stat = uct.select_move(res), {"agent": UCT}
            if config.uct_value_targets:
                final_value_rows.append(len(enc))
                enc.append(encode(state))
                pol.append(np.zeros(25))
                mask.append(0.0)
                tree_vals.append(None)
        elif config.variant == AZ:
            res = puct.search(state, evaluator, pcfg)
            target = puct.policy_target(res)
            move = puct.select_move(res, state.move_count, pcfg, rng)
            final_value_rows.append(len(enc))
            enc.append(encode(state))
            pol.append(target if target is not None else np.zeros(25))
            mask.append(1.0 if target is not None else 0.0)
            tree_vals.append(None)
            stat = {"agent": LEARNER,
                    "visits": {str(m): n for m, n in sorted(res.visits.items())}}
        else:
            best, tree = descent.search(state, evaluator, descent.DescentConfig(config.n_rollouts))
            move = best
            if rng.random() < config.descent_epsilon:
                move = legal[int(rng.integers(len(legal)))]
            for e, v in descent.collect_targets(tree, include_terminal=True):
                enc.append(e)
                pol.append(np.zeros(25))
                mask.append(0.0)
                tree_vals.append(v)
            stat = {"agent": LEARNER, "value": [round(float(x), 6) for x in tree.value]}
        moves.append(move)
        stats.append(stat)
        state = state.play(move)
    final = state.score()
    values = np.zeros((len(enc), 3), dtype=np.float32)
    for i, v in enumerate(tree_vals):
        if v is not None:
            values[i] = np.clip(v, 0, MAX_SCORE)
    for i in final_value_rows:
        values[i] = final
    record = GameRecord(5, len(assignment), moves, [int(x) for x in final], stats,
                        extra={"agents": list(assignment)})
    shape = (0, 6, 5, 5)
    return TrainingGame(record,
                        np.array(enc, dtype=np.uint8).reshape(-1, 6, 5, 5) if enc else np.zeros(shape, np.uint8),
                        values, np.array(pol, dtype=np.float32).reshape(-1, 25),
                        np.array(mask, dtype=np.float32))


class ReplayBuffer:
    """FIFO of whole games; training samples are uniform over their positions."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.games: deque[TrainingGame] = deque(maxlen=capacity)

    def __len__(self):
        return len(self.games)

    def extend(self, games):
        self.games.extend(games)

    @property
    def n_positions(self) -> int:
        return sum(g.n_positions for g in self.games)

    def arrays(self):
        if not self.games:
            return (np.zeros((0, 6, 5, 5), np.uint8), np.zeros((0, 3), np.float32),
                    np.zeros((0, 25), np.float32), np.zeros(0, np.float32))
        gs = list(self.games)
        return (np.concatenate([g.encodings for g in gs]), np.concatenate([g.values for g in gs]),
                np.concatenate([g.policies for g in gs]), np.concatenate([g.policy_mask for g in gs]))

    def save(self, path: Path):
        enc, val, pol, mask = self.arrays()
        lengths = np.array([g.n_positions for g in self.games], dtype=np.int64)
        records = np.array([g.record.to_json() for g in self.games], dtype=object)
        with open(path, "wb") as f:
            np.savez(f, encodings=enc, values=val, policies=pol, policy_mask=mask,
                     lengths=lengths, records=records.astype(str))

    @classmethod
    def load(cls, path: Path, capacity: int) -> "ReplayBuffer":
        buf = cls(capacity)
        with np.load(path) as z:
            bounds = np.concatenate([[0], np.cumsum(z["lengths"])])
            for i, rec in enumerate(z["records"]):
                a, b = bounds[i], bounds[i + 1]
                buf.games.append(TrainingGame(GameRecord.from_json(str(rec)), z["encodings"][a:b],
                                              z["values"][a:b], z["policies"][a:b],
                                              z["policy_mask"][a:b]))
        return buf


def game_rng(seed: int, iteration: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration, index])


def _generate(snapshot: bytes | None, config: TrainConfig, iteration: int, epsilon: float,
              indices: list[int]) -> list[TrainingGame]:
    torch.set_num_threads(1)
    net = None
    if snapshot is not None:
        net = MultiGoNet(config.variant, config.blocks, config.filters, config.value_hidden)
        net.load_state_dict(torch.load(io.BytesIO(snapshot), weights_only=True))
    games = []
    for i in indices:
        rng = game_rng(config.seed, iteration, i)
        assignment = assign_agents(rng, epsilon) if config.warm_start else (LEARNER,) * 3
        games.append(play_training_game(assignment, net, config, rng))
    return games


class Pipeline:
    """Training state: network, optimizer, replay buffer and iteration counter."""

    def __init__(self, config: TrainConfig, run_dir: str | Path | None = None):
        self.config = config
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.iteration = 0
        self.truncated = False
        self.net = MultiGoNet(config.variant, config.blocks, config.filters,
                              config.value_hidden, seed=config.seed)
        self.optimizer = make_optimizer(self.net, lr=config.lr, momentum=config.momentum) \
            if config.variant == AZ else make_optimizer(self.net, lr=config.lr)
        self.buffer = ReplayBuffer(config.buffer_size)
        self._t0 = time.monotonic()
        if self.run_dir is not None:
            self._open_run_dir()

    # -- run directory -----------------------------------------------------

    def _open_run_dir(self):
        d = self.run_dir
        (d / "eval").mkdir(parents=True, exist_ok=True)
        cfg_path = d / "config.json"
        if (d / "latest.ckpt").exists():
            ck = load_checkpoint(d / "latest.ckpt")
            self.net = ck.net
            self.optimizer = ck.make_optimizer()
            self.iteration = ck.iteration
            if (d / "buffer.npz").exists():
                self.buffer = ReplayBuffer.load(d / "buffer.npz", self.config.buffer_size)
            log.info("resumed %s at iteration %d", d, self.iteration)
            return
        cfg_path.write_text(json.dumps(dataclasses.asdict(self.config), indent=2, sort_keys=True) + "\n")
        with open(d / "metrics.csv", "w", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(METRICS_HEADER)
        with open(d / "timing.csv", "w", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(["iteration", "wall_clock"])
        save_checkpoint(d / "eval" / "iter_0000.ckpt", self.net, None, 0)

    def _eval_due(self) -> bool:
        step = max(1, round(self.config.n_updates * self.config.eval_every))
        return self.iteration % step == 0 or self.iteration == self.config.n_updates

    # -- iteration ---------------------------------------------------------

    def generate(self, epsilon: float) -> list[TrainingGame]:
        cfg = self.config
        buf = io.BytesIO()
        torch.save(self.net.state_dict(), buf)
        snapshot = buf.getvalue()
        indices = list(range(cfg.n_games))
        if cfg.n_envs == 1:
            return _generate(snapshot, cfg, self.iteration, epsilon, indices)
        chunks = [indices[k::cfg.n_envs] for k in range(cfg.n_envs)]
        with ProcessPoolExecutor(cfg.n_envs, mp_context=get_context("spawn")) as pool:
            parts = list(pool.map(_generate, [snapshot] * len(chunks), [cfg] * len(chunks),
                                  [self.iteration] * len(chunks), [epsilon] * len(chunks), chunks))
        by_index = {}
        for chunk, games in zip(chunks, parts):
            by_index.update(zip(chunk, games))
        return [by_index[i] for i in indices]

    def train_epoch(self) -> float:
        """One pass over the buffered positions in shuffled batches; returns the mean loss."""
        cfg = self.config
        enc, val, pol, mask = self.buffer.arrays()
        n = len(enc)
        if n == 0:
            return float("nan")
        order = np.random.default_rng([cfg.seed, self.iteration, 0xB1]).permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = enc[idx].astype(np.float32)
            if cfg.variant == AZ:
                batch = TrainBatch.az(x, val[idx], pol[idx], mask[idx])
            else:
                batch = TrainBatch.descent(x, val[idx])
            losses.append(train_step(self.net, self.optimizer, batch))
        self.net.eval()
        return float(np.mean(losses))

    def run_iteration(self) -> dict:
        cfg = self.config
        eps = warm_start_epsilon(self.iteration, cfg.n_updates)
        games = self.generate(eps)
        self.buffer.extend(games)
        loss = self.train_epoch()
        self.iteration += 1
        metrics = {"iteration": self.iteration, "epsilon": eps, "mean_loss": loss,
                   "buffer_fill": len(self.buffer), "games": len(games),
                   "positions": sum(g.n_positions for g in games)}
        if self.run_dir is not None:
            self._persist(games, metrics)
        return metrics

    def _persist(self, games, metrics):
        d = self.run_dir
        write_records(d / "games.jsonl", [g.record for g in games])
        with open(d / "metrics.csv", "a", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow([metrics[k] if not isinstance(metrics[k], float)
                                                         else repr(metrics[k]) for k in METRICS_HEADER])
        with open(d / "timing.csv", "a", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(
                [self.iteration, f"{time.monotonic() - self._t0:.3f}"])
        save_checkpoint(d / "latest.ckpt", self.net, self.optimizer, self.iteration)
        self.buffer.save(d / "buffer.npz")
        if self._eval_due():
            save_checkpoint(d / "eval" / f"iter_{self.iteration:04d}.ckpt", self.net, None, self.iteration)

    def run(self, on_iteration=None) -> list[dict]:
        """Iterate until ``n_updates`` or the wall-clock limit; records truncation."""
        cfg = self.config
        out = []
        while self.iteration < cfg.n_updates:
            if cfg.wall_clock_limit is not None and \
                    time.monotonic() - self._t0 > cfg.wall_clock_limit * 3600:
                self.truncated = True
                break
            m = self.run_iteration()
            log.info("iteration %d: %s", self.iteration, m)
            out.append(m)
            if on_iteration is not None:
                on_iteration(m)
        if self.run_dir is not None:
            (self.run_dir / "summary.json").write_text(json.dumps(
                {"iterations": self.iteration, "truncated": self.truncated,
                 "games": self.iteration * cfg.n_games}, sort_keys=True) + "\n")
        return out
