"""Newline-delimited JSON game records.

Each line is one object::

    {"v": "v1", "size": 5, "num_players": 3, "moves": ["2,2", "pass", ...],
     "final_scores": [11, 7, 6], "per_move_stats": [...]}

``per_move_stats`` is optional. Writing is canonical (sorted keys, compact
separators), so write -> read -> write reproduces the bytes exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .state import GameState, Move, new_game

VERSION = "v1"


class RecordFormatError(ValueError):
    pass


@dataclass
class GameRecord:
    size: int
    num_players: int
    moves: list[Move]
    final_scores: list[int]
    per_move_stats: list[Any] | None = None
    move_cap: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {"v": VERSION, "size": self.size, "num_players": self.num_players,
               "moves": [str(m) for m in self.moves],
               "final_scores": [int(s) for s in self.final_scores]}
        if self.per_move_stats is not None:
            obj["per_move_stats"] = self.per_move_stats
        if self.move_cap is not None:
            obj["move_cap"] = self.move_cap
        obj.update(self.extra)
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "GameRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise RecordFormatError(str(e)) from e
        if obj.pop("v", None) != VERSION:
            raise RecordFormatError("missing or unsupported record version")
        try:
            return cls(size=obj.pop("size"), num_players=obj.pop("num_players"),
                       moves=[Move.parse(m) for m in obj.pop("moves")],
                       final_scores=obj.pop("final_scores"),
                       per_move_stats=obj.pop("per_move_stats", None),
                       move_cap=obj.pop("move_cap", None), extra=obj)
        except (KeyError, ValueError) as e:
            raise RecordFormatError(f"bad record: {e}") from e

    def replay(self) -> list[GameState]:
        """All states from the empty board through the final position."""
        state = new_game(self.num_players, self.size, self.move_cap)
        states = [state]
        for m in self.moves:
            state = state.play(m)
            states.append(state)
        return states


def write_records(path: str | Path, records: Iterable[GameRecord], append: bool = True) -> None:
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def read_records(path: str | Path) -> Iterator[GameRecord]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield GameRecord.from_json(line)
