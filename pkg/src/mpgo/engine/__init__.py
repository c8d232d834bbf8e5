"""N-player Go rules: legality, captures, positional superko, eyes and area scoring."""
from .records import GameRecord, RecordFormatError, read_records, write_records
from .state import (BLACK, PASS, RED, WHITE, GameState, IllegalMove, InvalidBoardSize,
                    InvalidPlayerCount, Move, default_move_cap, from_grid, new_game,
                    position_hash)

__all__ = [
    "BLACK", "WHITE", "RED", "PASS", "GameState", "Move", "IllegalMove",
    "InvalidBoardSize", "InvalidPlayerCount", "default_move_cap", "from_grid",
    "new_game", "position_hash", "GameRecord", "RecordFormatError",
    "read_records", "write_records",
]
