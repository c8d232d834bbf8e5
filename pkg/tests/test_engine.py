import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpgo.engine import (BLACK, PASS, RED, WHITE, GameRecord, IllegalMove, InvalidBoardSize,
                         InvalidPlayerCount, Move, from_grid, new_game, position_hash,
                         read_records, write_records)
from mpgo.engine.state import _tables

from oracles import NaiveGame, flood_fill_score, group_and_liberties, naive_is_eye


def to_naive_board(state):
    return tuple(None if v == 0 else int(v) - 1 for v in state.board)


def random_game(seed, size=5, num_players=3, move_cap=None):
    rng = np.random.default_rng(seed)
    s = new_game(num_players, size, move_cap)
    states = [s]
    while not s.is_terminal():
        moves = s.legal_moves()
        s = s.play(moves[rng.integers(len(moves))])
        states.append(s)
    return states


class TestNewGame:
    def test_initial_state(self):
        s = new_game(3, 5)
        assert s.to_move == BLACK
        assert s.consecutive_passes == 0 and s.move_count == 0
        assert not s.board.any()
        assert s.history == {position_hash(s)}
        assert s.move_cap == 150

    def test_two_players(self):
        assert new_game(2, 5).num_players == 2

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidPlayerCount):
            new_game(1, 5)
        with pytest.raises(InvalidBoardSize):
            new_game(3, 10)
        with pytest.raises(InvalidBoardSize):
            new_game(3, 1)


class TestLegalMoves:
    def test_empty_board(self):
        moves = new_game().legal_moves()
        assert len(moves) == 25 and PASS not in moves

    def test_forced_pass(self):
        # every empty point is a Black eye or suicide for White
        s = from_grid(["XXXX.",
                       "X.XXX",
                       "XXXXX",
                       "XXX.X",
                       ".XXXX"], to_move=WHITE)
        assert s.legal_moves() == [PASS]
        s2 = from_grid(["XXXX.",
                        "X.XXX",
                        "XXXXX",
                        "XXX.X",
                        ".XXXX"], to_move=BLACK)
        assert s2.legal_moves() == [PASS]

    def test_suicide_excluded(self):
        s = from_grid([".O...",
                       "O....",
                       ".....",
                       ".....",
                       "....."], to_move=RED)
        assert Move(0, 0) not in s.legal_moves()
        assert s.illegal_reason(Move(0, 0)) == "suicide"
        # capturing is not suicide
        s = from_grid([".OX..",
                       "OX...",
                       "X....",
                       ".....",
                       "....."], to_move=BLACK)
        assert Move(0, 0) in s.legal_moves()

    def test_eye_fill_excluded(self):
        s = from_grid([".X...",
                       "XX...",
                       ".....",
                       ".....",
                       "....."], to_move=BLACK)
        assert Move(0, 0) not in s.legal_moves()
        assert s.illegal_reason(Move(0, 0)) == "eye-fill"
        # another player may play there (suicide for them, here)
        assert from_grid(["OX...", "XX...", ".....", ".....", "....."],
                         to_move=BLACK).illegal_reason(Move(0, 2)) is None


class TestIsEye:
    def test_corner_eye(self):
        s = from_grid([".X...", "XX...", ".....", ".....", "....."])
        assert s.is_eye((0, 0), BLACK)
        assert not s.is_eye((0, 0), WHITE)

    def test_empty_neighbour(self):
        s = from_grid(["..X..", ".X...", ".....", ".....", "....."])
        assert not s.is_eye((0, 1), BLACK)

    def test_two_groups(self):
        s = from_grid([".X...", "X....", ".....", ".....", "....."])
        assert not s.is_eye((0, 0), BLACK)
        board = to_naive_board(s)
        g, _ = group_and_liberties(board, 5, 1)
        assert 5 not in g  # oracle agrees the two stones are separate groups

    def test_matches_flood_fill_oracle(self):
        for seed in range(30):
            for s in random_game(seed)[::7]:
                board = to_naive_board(s)
                for p in range(25):
                    for pl in range(3):
                        assert s.is_eye(divmod(p, 5), pl) == naive_is_eye(board, 5, p, pl)


class TestPlay:
    def test_single_capture(self):
        s = from_grid(["O....", "X....", ".....", ".....", "....."], to_move=BLACK)
        t = s.play(Move(0, 1))
        assert t.grid()[0, 0] == -1
        assert t.score()[WHITE] == 0
        assert t.to_move == WHITE and t.consecutive_passes == 0

    def test_pass_rejected_when_placements_exist(self):
        with pytest.raises(IllegalMove) as e:
            new_game().play(PASS)
        assert e.value.reason == "pass not allowed"

    def test_occupied(self):
        s = new_game().play(Move(2, 2))
        with pytest.raises(IllegalMove) as e:
            s.play(Move(2, 2))
        assert e.value.reason == "occupied"

    def test_superko_cycle(self):
        # found by the naive oracle: after these placements Black at 8
        # recreates an earlier whole-board position with White to move
        s = new_game(3, 3)
        naive = NaiveGame(3, 3, s.move_cap)
        for p in [0, 7, 3, 8, 4, 1, 5, 2, 6, 5, 0, 3]:
            s = s.play(Move(*divmod(p, 3)))
            naive = naive.play(p)
        assert s.to_move == BLACK
        with pytest.raises(IllegalMove) as e:
            s.play(Move(2, 2))
        assert e.value.reason == "superko"
        assert 8 not in naive.placements()

    def test_superko_ignores_player_to_move(self):
        # found by random search: Red at (0,1) recreates a board first seen
        # with White to move; it would now be Black's turn
        s = new_game(3, 3)
        naive = NaiveGame(3, 3, s.move_cap)
        for p in [7, 2, 0, 3, 4, 8, 1, 0, 1, 5, -1, 4, 6, -1, 2, 0, 4, 1, 4, 2]:
            s = s.play(PASS if p < 0 else Move(*divmod(p, 3)))
            naive = naive.play(None if p < 0 else p)
        assert s.to_move == RED
        assert s.illegal_reason(Move(0, 1)) == "superko"
        assert 1 not in naive.placements()

    def test_purity(self):
        s = random_game(3)[20]
        before = s.board.copy(), s.history_hashes.copy()
        m = s.legal_moves()[0]
        a, b = s.play(m), s.play(m)
        assert a == b
        assert np.array_equal(s.board, before[0])
        assert np.array_equal(s.history_hashes, before[1])
        assert not s.board.flags.writeable

    def test_passes_advance(self):
        s = from_grid(["XXXX.", "X.XXX", "XXXXX", "XXX.X", ".XXXX"], to_move=BLACK)
        for i in range(3):
            assert s.legal_moves() == [PASS]
            s = s.play(PASS)
        assert s.consecutive_passes == 3 and s.is_terminal()
        with pytest.raises(IllegalMove):
            s.play(PASS)


class TestTerminal:
    def test_cases(self):
        assert not new_game().is_terminal()
        s = new_game(3, 5, move_cap=2).play(Move(0, 0)).play(Move(4, 4))
        assert s.move_count == 2 and s.is_terminal()

    def test_cap_150(self):
        s = new_game(3, 5)
        object.__setattr__(s, "move_count", 150)
        assert s.is_terminal()


class TestScore:
    def test_empty(self):
        assert list(new_game().score()) == [0, 0, 0]

    def test_all_black(self):
        s = from_grid(["XXXXX"] * 5)
        assert list(s.score()) == [25, 0, 0]

    def test_shared_region_is_neutral(self):
        s = from_grid(["X.O..", ".....", ".....", ".....", "....."])
        assert list(s.score()) == [1, 1, 0]

    def test_matches_oracle_on_playouts(self):
        for seed in range(300):
            s = random_game(seed)[-1]
            assert list(s.score()) == flood_fill_score(to_naive_board(s), 5, 3)

    def test_playout_matches_rules(self):
        s = new_game()
        a, b = s.playout(7), s.playout(7)
        assert np.array_equal(a, b)
        t = random_game(5)[-1]
        assert np.array_equal(t.playout(1), t.score())


class TestHash:
    def test_identity(self):
        assert position_hash(new_game()) == position_hash(new_game())

    def test_position_only(self):
        # Black captures White at (0,0) then the position equals one built directly
        s = from_grid(["O....", "X....", ".....", ".....", "....."], to_move=BLACK)
        t = s.play(Move(0, 1))
        direct = from_grid([".X...", "X....", ".....", ".....", "....."], to_move=WHITE)
        assert position_hash(t) == position_hash(direct)

    def test_collisions_at_birthday_bound(self):
        # expected collisions among 1e6 distinct positions: n^2 / 2^65 ~ 3e-8
        rng = np.random.default_rng(0)
        _, zkeys, tkeys = _tables(5)
        n = 1_000_000
        boards = rng.integers(0, 4, size=(n, 25), dtype=np.int8)
        to_move = rng.integers(0, 3, size=n)
        keys = np.concatenate([np.zeros((25, 1), np.int64), zkeys[:, :3]], axis=1)
        h = np.bitwise_xor.reduce(keys[np.arange(25), boards], axis=1) ^ tkeys[to_move]
        ident = np.concatenate([boards, to_move[:, None].astype(np.int8)], axis=1)
        distinct = np.unique(ident, axis=0).shape[0]
        assert np.unique(h).shape[0] == distinct

    def test_incremental_matches_scratch(self):
        for s in random_game(11)[::5]:
            grid = s.grid()
            rows = ["".join("." if v < 0 else "XOR"[v] for v in row) for row in grid]
            assert position_hash(from_grid(rows, to_move=s.to_move)) == position_hash(s)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([(3, 5), (2, 5), (3, 4), (4, 6)]))
def test_invariants_hold_during_random_play(seed, shape):
    num_players, size = shape
    seen = set()
    for s in random_game(seed, size, num_players):
        board = to_naive_board(s)
        for p in range(size * size):
            if board[p] is not None:
                assert group_and_liberties(board, size, p)[1]
        sc = s.score()
        assert sc.sum() <= size * size and sc.min() >= 0
        moves = s.legal_moves() if not s.is_terminal() else []
        assert not (PASS in moves and len(moves) > 1)
        if s.consecutive_passes == 0:
            assert int(s.hash) not in seen
        seen.add(int(s.hash))
        assert s.move_count <= s.move_cap


def test_record_roundtrip(tmp_path):
    states = random_game(2)
    moves = []
    for a, b in zip(states, states[1:]):
        for m in a.legal_moves():
            if a.play(m) == b:
                moves.append(m)
                break
    rec = GameRecord(5, 3, moves, [int(x) for x in states[-1].score()],
                     per_move_stats=[[0.25, 0.75]] * len(moves))
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_records(p1, [rec, rec])
    write_records(p2, list(read_records(p1)))
    assert p1.read_bytes() == p2.read_bytes()
    back = next(read_records(p1))
    assert back.replay()[-1] == states[-1]
    assert '"v":"v1"' in p1.read_text()
