from __future__ import annotations

from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels as K

MIN_SIZE, MAX_SIZE = 2, 9
GLYPHS = "XOR" + "ABCDE"
BLACK, WHITE, RED = 0, 1, 2


class InvalidPlayerCount(ValueError):
    pass


class InvalidBoardSize(ValueError):
    pass


class IllegalMove(ValueError):
    def __init__(self, reason: str, move: "Move | None" = None):
        super().__init__(f"illegal: {reason}" + (f" ({move})" if move is not None else ""))
        self.reason = reason
        self.move = move


class Move(NamedTuple):
    """A placement at ``(row, col)``; the pass is ``Move(-1, -1)``."""

    row: int = -1
    col: int = -1

    @property
    def is_pass(self) -> bool:
        return self.row < 0

    def __str__(self) -> str:
        return "pass" if self.is_pass else f"{self.row},{self.col}"

    @classmethod
    def parse(cls, text: str) -> "Move":
        text = text.strip().lower()
        if text == "pass":
            return PASS
        r, c = text.split(",")
        return cls(int(r), int(c))


PASS = Move()

_REASONS = {1: "occupied", 2: "eye-fill", 3: "suicide", 4: "superko"}


@lru_cache(maxsize=None)
def _tables(size: int):
    """Neighbour table and Zobrist keys for a board size (fixed seed, shared)."""
    rng = np.random.default_rng([0x5EED, size])
    zkeys = rng.integers(np.iinfo(np.int64).min, np.iinfo(np.int64).max,
                         size=(size * size, K.MAX_PLAYERS), dtype=np.int64)
    tkeys = rng.integers(np.iinfo(np.int64).min, np.iinfo(np.int64).max,
                         size=K.MAX_PLAYERS, dtype=np.int64)
    nbr = K.neighbour_table(size)
    for a in (zkeys, tkeys, nbr):
        a.flags.writeable = False
    return nbr, zkeys, tkeys


def default_move_cap(size: int) -> int:
    return 6 * size * size


class GameState:
    """Immutable N-player Go position.

    ``board`` is a read-only flat ``int8`` array (0 empty, ``p + 1`` for
    player ``p``). ``history_hashes`` holds every position hash reached so
    far, in order, including the current one.
    """

    __slots__ = ("size", "num_players", "board", "to_move", "consecutive_passes",
                 "move_count", "move_cap", "hash", "history_hashes", "_mask")

    def __init__(self, size, num_players, board, to_move, consecutive_passes,
                 move_count, move_cap, hash, history_hashes):
        self.size = size
        self.num_players = num_players
        self.board = board
        self.to_move = to_move
        self.consecutive_passes = consecutive_passes
        self.move_count = move_count
        self.move_cap = move_cap
        self.hash = hash
        self.history_hashes = history_hashes
        self._mask = None

    # -- rules -------------------------------------------------------------

    @property
    def history(self) -> frozenset:
        return frozenset(int(h) for h in self.history_hashes)

    def legal_mask(self) -> np.ndarray:
        """Boolean mask over the ``size*size`` points of legal placements."""
        if self._mask is None:
            nbr, zkeys, tkeys = _tables(self.size)
            m = K.legal_mask(self.board, nbr, self.to_move, self.num_players,
                             self.hash, self.history_hashes, zkeys, tkeys)
            m.flags.writeable = False
            self._mask = m
        return self._mask

    def legal_moves(self) -> list[Move]:
        """Legal placements in row-major order, or exactly ``[PASS]`` when there are none."""
        idx = np.flatnonzero(self.legal_mask())
        if idx.size == 0:
            return [PASS]
        s = self.size
        return [Move(int(i) // s, int(i) % s) for i in idx]

    def is_eye(self, point: tuple[int, int], player: int) -> bool:
        nbr, _, _ = _tables(self.size)
        r, c = point
        return bool(K.is_eye(self.board, nbr, r * self.size + c, player + 1))

    def is_terminal(self) -> bool:
        return (self.consecutive_passes >= self.num_players
                or self.move_count >= self.move_cap)

    def score(self) -> np.ndarray:
        nbr, _, _ = _tables(self.size)
        return K.score(self.board, nbr, self.num_players)

    def illegal_reason(self, move: Move) -> str | None:
        if self.is_terminal():
            return "game over"
        if move.is_pass:
            return None if not self.legal_mask().any() else "pass not allowed"
        if not (0 <= move.row < self.size and 0 <= move.col < self.size):
            return "off board"
        p = move.row * self.size + move.col
        if self.legal_mask()[p]:
            return None
        nbr, zkeys, tkeys = _tables(self.size)
        keys, used = K._build_table(self.history_hashes, 0, self.to_move, self.num_players, tkeys)
        status, _ = K.placement_status(self.board, nbr, p, self.to_move, self.num_players,
                                       self.hash, keys, used, zkeys, tkeys)
        return _REASONS[int(status)]

    def play(self, move: Move) -> "GameState":
        """Return the successor state; raises :class:`IllegalMove`."""
        if self.is_terminal():
            raise IllegalMove("game over", move)
        nbr, zkeys, tkeys = _tables(self.size)
        nxt = (self.to_move + 1) % self.num_players
        if move.is_pass:
            if self.legal_mask().any():
                raise IllegalMove("pass not allowed", move)
            board = self.board
            passes = self.consecutive_passes + 1
            h = self.hash ^ tkeys[self.to_move] ^ tkeys[nxt]
        else:
            reason = self.illegal_reason(move)
            if reason is not None:
                raise IllegalMove(reason, move)
            board = self.board.copy()
            _, delta, _ = K.apply_place(board, nbr, move.row * self.size + move.col,
                                        self.to_move + 1, zkeys)
            board.flags.writeable = False
            passes = 0
            h = self.hash ^ delta ^ tkeys[self.to_move] ^ tkeys[nxt]
        hist = np.append(self.history_hashes, np.int64(h))
        hist.flags.writeable = False
        return GameState(self.size, self.num_players, board, nxt, passes,
                         self.move_count + 1, self.move_cap, np.int64(h), hist)

    def playout(self, seed: int) -> np.ndarray:
        """Uniform-random legal play to the end; returns the terminal score vector."""
        nbr, zkeys, tkeys = _tables(self.size)
        return K.playout(self.board, nbr, self.to_move, self.num_players,
                         self.consecutive_passes, self.move_count, self.move_cap,
                         self.hash, self.history_hashes, zkeys, tkeys,
                         np.uint64(seed))

    # -- conveniences ------------------------------------------------------

    def grid(self) -> np.ndarray:
        """Occupancy as a ``(size, size)`` array: -1 empty, else player index."""
        return self.board.reshape(self.size, self.size).astype(np.int64) - 1

    def stone_count(self) -> int:
        return int(np.count_nonzero(self.board))

    def render(self) -> str:
        rows = []
        for r in range(self.size):
            cells = self.board[r * self.size:(r + 1) * self.size]
            rows.append(" ".join("." if v == 0 else GLYPHS[v - 1] for v in cells))
        return "\n".join(rows)

    def __eq__(self, other):
        if not isinstance(other, GameState):
            return NotImplemented
        return (self.size == other.size and self.num_players == other.num_players
                and self.to_move == other.to_move
                and self.consecutive_passes == other.consecutive_passes
                and self.move_count == other.move_count and self.move_cap == other.move_cap
                and np.array_equal(self.board, other.board)
                and np.array_equal(self.history_hashes, other.history_hashes))

    __hash__ = None

    def __repr__(self):
        return (f"GameState(size={self.size}, num_players={self.num_players}, "
                f"to_move={self.to_move}, move_count={self.move_count}, "
                f"passes={self.consecutive_passes})")


def new_game(num_players: int = 3, size: int = 5, move_cap: int | None = None) -> GameState:
    if num_players < 2 or num_players > K.MAX_PLAYERS:
        raise InvalidPlayerCount(f"num_players must be in [2, {K.MAX_PLAYERS}], got {num_players}")
    if not MIN_SIZE <= size <= MAX_SIZE:
        raise InvalidBoardSize(f"size must be in [{MIN_SIZE}, {MAX_SIZE}], got {size}")
    if move_cap is None:
        move_cap = default_move_cap(size)
    _, _, tkeys = _tables(size)
    board = np.zeros(size * size, dtype=np.int8)
    board.flags.writeable = False
    h = np.int64(tkeys[0])
    hist = np.array([h], dtype=np.int64)
    hist.flags.writeable = False
    return GameState(size, num_players, board, 0, 0, 0, move_cap, h, hist)


def from_grid(rows: Iterable[str], to_move: int = 0, num_players: int = 3,
              move_cap: int | None = None) -> GameState:
    """Build a position from text rows using the render glyphs (no move history)."""
    rows = [r.replace(" ", "") for r in rows if r.strip()]
    size = len(rows)
    state = new_game(num_players, size, move_cap)
    _, zkeys, tkeys = _tables(size)
    board = np.zeros(size * size, dtype=np.int8)
    h = np.int64(tkeys[to_move])
    for r, line in enumerate(rows):
        if len(line) != size:
            raise InvalidBoardSize("board rows must be square")
        for c, ch in enumerate(line):
            if ch != ".":
                p = GLYPHS.index(ch)
                board[r * size + c] = p + 1
                h ^= zkeys[r * size + c, p]
    board.flags.writeable = False
    hist = np.array([h], dtype=np.int64)
    hist.flags.writeable = False
    return GameState(size, num_players, board, to_move, 0, 0, state.move_cap, h, hist)


def position_hash(state: GameState) -> int:
    return int(state.hash)
