# %% [markdown]
# # Three-player Go rules on a 5x5 board
#
# Black (X), White (O) and Red (R) take turns. A player may pass only when
# no placement is legal, own eyes may not be filled, and a placement that
# recreates an earlier board is rejected (positional superko).

# %%
import numpy as np

from mpgo.engine import PASS, IllegalMove, Move, from_grid, new_game

s = new_game()
print(s.render())
print("to move:", s.to_move, " legal:", len(s.legal_moves()))

# %% [markdown]
# ## Captures
# White's stone at the centre is surrounded on three sides. Black closes the
# last liberty; the captured point becomes empty again.

# %%
s = from_grid([
    ". . . . .",
    ". . X . .",
    ". X O . .",
    ". . X . .",
    ". . . . .",
])
after = s.play(Move(2, 3))
print(after.render())

# %% [markdown]
# ## Eyes and passing
# An empty point surrounded only by the mover's stones is an eye. It is not
# a legal placement for its owner, so a board full of Black eyes forces Black
# to pass.

# %%
s = from_grid([
    "X X X X X",
    "X . X . X",
    "X X X X X",
    "X . X . X",
    "X X X X X",
])
print("eye at (1,1):", s.is_eye((1, 1), 0))
print("Black's legal moves:", s.legal_moves())
try:
    new_game().play(PASS)
except IllegalMove as e:
    print("pass on an open board:", e)

# %% [markdown]
# ## Area scoring
# Stones plus empty regions bordered by one colour only. Random playouts
# never exceed 25 points in total.

# %%
totals = [new_game().playout(seed).sum() for seed in range(200)]
print("score total over 200 random games: min", min(totals), "max", max(totals))
print("example final score:", new_game().playout(0))
