"""Numba kernels for the board rules.

Boards are flat ``int8`` arrays of length ``size * size``: 0 is empty and
``p + 1`` is a stone of player ``p``. Neighbour tables are ``(n, 4)`` with
``-1`` padding. Position hashes are signed 64-bit Zobrist values.
"""
import numpy as np
from numba import njit

EMPTY = 0
MAX_PLAYERS = 8


@njit(cache=True)
def _next_random(rng):
    # splitmix64; rng is a length-1 uint64 array
    rng[0] += np.uint64(0x9E3779B97F4A7C15)
    z = rng[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _randbelow(rng, n):
    return np.int64(_next_random(rng) % np.uint64(n))


@njit(cache=True)
def group_of(board, nbr, start, members, seen):
    """Flood-fill the group at ``start``; returns (member count, liberty count).

    ``seen`` must be zeroed by the caller and is left marked for members.
    """
    color = board[start]
    libmark = np.zeros(board.shape[0], np.uint8)
    members[0] = start
    seen[start] = 1
    count = 1
    head = 0
    libs = 0
    while head < count:
        p = members[head]
        head += 1
        for k in range(4):
            q = nbr[p, k]
            if q < 0:
                break
            v = board[q]
            if v == EMPTY:
                if libmark[q] == 0:
                    libmark[q] = 1
                    libs += 1
            elif v == color and seen[q] == 0:
                seen[q] = 1
                members[count] = q
                count += 1
    return count, libs


@njit(cache=True)
def is_eye(board, nbr, p, color):
    if board[p] != EMPTY:
        return False
    first = -1
    for k in range(4):
        q = nbr[p, k]
        if q < 0:
            break
        if board[q] != color:
            return False
        if first < 0:
            first = q
    if first < 0:
        return False
    members = np.empty(board.shape[0], np.int64)
    seen = np.zeros(board.shape[0], np.uint8)
    group_of(board, nbr, first, members, seen)
    for k in range(4):
        q = nbr[p, k]
        if q < 0:
            break
        if seen[q] == 0:
            return False
    return True


@njit(cache=True)
def apply_place(board, nbr, p, color, zkeys):
    """Place a stone in-place and resolve captures.

    Every other colour's zero-liberty group adjacent to ``p`` is removed at
    once, then the placed group is checked. Returns ``(ok, hash_delta,
    captured)``; ``ok`` is False for suicide, leaving ``board`` garbage.
    """
    n = board.shape[0]
    board[p] = color
    delta = zkeys[p, color - 1]
    members = np.empty(n, np.int64)
    doomed = np.zeros(n, np.uint8)
    captured = 0
    for k in range(4):
        q = nbr[p, k]
        if q < 0:
            break
        v = board[q]
        if v == EMPTY or v == color or doomed[q]:
            continue
        seen = np.zeros(n, np.uint8)
        cnt, libs = group_of(board, nbr, q, members, seen)
        if libs == 0:
            for i in range(cnt):
                doomed[members[i]] = 1
    for q in range(n):
        if doomed[q]:
            delta ^= zkeys[q, board[q] - 1]
            board[q] = EMPTY
            captured += 1
    seen = np.zeros(n, np.uint8)
    cnt, libs = group_of(board, nbr, p, members, seen)
    return libs > 0, delta, captured


@njit(cache=True)
def _table_capacity(n_entries):
    cap = 64
    while cap < 4 * (n_entries + 1):
        cap *= 2
    return cap


@njit(cache=True)
def _table_insert(keys, used, h):
    mask = keys.shape[0] - 1
    i = h & mask
    while used[i]:
        if keys[i] == h:
            return False
        i = (i + 1) & mask
    used[i] = 1
    keys[i] = h
    return True


@njit(cache=True)
def _table_contains(keys, used, h):
    mask = keys.shape[0] - 1
    i = h & mask
    while used[i]:
        if keys[i] == h:
            return True
        i = (i + 1) & mask
    return False


@njit(cache=True)
def _build_table(history, extra, to_move, num_players, tkeys):
    """Occupancy-only hashes of every position in ``history``.

    History entries are consecutive plies ending with ``to_move`` to play, so
    the turn key of each entry can be stripped.
    """
    n = history.shape[0]
    cap = _table_capacity(n + extra)
    keys = np.zeros(cap, np.int64)
    used = np.zeros(cap, np.uint8)
    for i in range(n):
        mover = (to_move - (n - 1 - i)) % num_players
        _table_insert(keys, used, history[i] ^ tkeys[mover])
    return keys, used


@njit(cache=True)
def placement_status(board, nbr, p, to_move, num_players, h, keys, used, zkeys, tkeys):
    """Classify a placement: 0 legal, 1 occupied, 2 eye-fill, 3 suicide, 4 superko.

    Also returns the hash of the resulting position (0 unless legal).
    """
    color = to_move + 1
    if board[p] != EMPTY:
        return 1, np.int64(0)
    if is_eye(board, nbr, p, color):
        return 2, np.int64(0)
    scratch = board.copy()
    ok, delta, _ = apply_place(scratch, nbr, p, color, zkeys)
    if not ok:
        return 3, np.int64(0)
    # positional superko: compare occupancy only
    if _table_contains(keys, used, h ^ tkeys[to_move] ^ delta):
        return 4, np.int64(0)
    nxt = (to_move + 1) % num_players
    return 0, h ^ delta ^ tkeys[to_move] ^ tkeys[nxt]


@njit(cache=True)
def legal_mask(board, nbr, to_move, num_players, h, history, zkeys, tkeys):
    n = board.shape[0]
    keys, used = _build_table(history, 0, to_move, num_players, tkeys)
    mask = np.zeros(n, np.bool_)
    for p in range(n):
        status, _ = placement_status(board, nbr, p, to_move, num_players, h,
                                     keys, used, zkeys, tkeys)
        mask[p] = status == 0
    return mask


@njit(cache=True)
def score(board, nbr, num_players):
    """Chinese area score: own stones plus empty regions bordered by one colour only."""
    n = board.shape[0]
    out = np.zeros(num_players, np.int64)
    seen = np.zeros(n, np.uint8)
    stack = np.empty(n, np.int64)
    for p in range(n):
        v = board[p]
        if v != EMPTY:
            out[v - 1] += 1
            continue
        if seen[p]:
            continue
        seen[p] = 1
        stack[0] = p
        top = 1
        size = 0
        border = 0
        while top > 0:
            top -= 1
            q = stack[top]
            size += 1
            for k in range(4):
                r = nbr[q, k]
                if r < 0:
                    break
                w = board[r]
                if w == EMPTY:
                    if seen[r] == 0:
                        seen[r] = 1
                        stack[top] = r
                        top += 1
                else:
                    border |= 1 << (w - 1)
        if border != 0 and (border & (border - 1)) == 0:
            c = 0
            while (border >> c) != 1:
                c += 1
            out[c] += size
    return out


@njit(cache=True)
def playout(board, nbr, to_move, num_players, passes, move_count, move_cap,
            h, history, zkeys, tkeys, seed):
    """Uniform-random legal play to the end of the game; returns the final scores.

    The first legal point of a lazily drawn random permutation is uniform over
    the legal set, so candidates are tested one at a time.
    """
    n = board.shape[0]
    b = board.copy()
    scratch = np.empty(n, np.int8)
    keys, used = _build_table(history, move_cap - move_count + 1, to_move, num_players, tkeys)
    order = np.arange(n)
    rng = np.empty(1, np.uint64)
    rng[0] = np.uint64(seed)
    while passes < num_players and move_count < move_cap:
        color = to_move + 1
        nxt = (to_move + 1) % num_players
        placed = False
        for i in range(n):
            j = i + _randbelow(rng, n - i)
            p = order[j]
            order[j] = order[i]
            order[i] = p
            if b[p] != EMPTY or is_eye(b, nbr, p, color):
                continue
            scratch[:] = b
            ok, delta, _ = apply_place(scratch, nbr, p, color, zkeys)
            if not ok:
                continue
            if _table_contains(keys, used, h ^ tkeys[to_move] ^ delta):
                continue
            b[:] = scratch
            h = h ^ delta ^ tkeys[to_move] ^ tkeys[nxt]
            placed = True
            break
        if placed:
            passes = 0
        else:
            passes += 1
            h = h ^ tkeys[to_move] ^ tkeys[nxt]
        to_move = nxt
        _table_insert(keys, used, h ^ tkeys[to_move])
        move_count += 1
    return score(b, nbr, num_players)


def neighbour_table(size: int) -> np.ndarray:
    nbr = np.full((size * size, 4), -1, dtype=np.int64)
    for r in range(size):
        for c in range(size):
            k = 0
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < size and 0 <= cc < size:
                    nbr[r * size + c, k] = rr * size + cc
                    k += 1
    return nbr
