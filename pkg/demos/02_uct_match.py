# %% [markdown]
# # UCT self-play and seat advantage
#
# Three identical UCT agents play each other, so any gap between the mean
# scores comes from seat order alone.

# %%
from mpgo.arena import AgentSpec, MatchSpec, run_match
from mpgo.engine import new_game
from mpgo.search import UctConfig
from mpgo.search import uct

# %% [markdown]
# One search from the empty board. Visit counts concentrate on a few points.

# %%
result = uct.search(new_game(), UctConfig(n_rollouts=180, c=0.8, rng_seed=1))
top = sorted(result.visits.items(), key=lambda kv: -kv[1])[:5]
for move, visits in top:
    print(move, visits, result.mean_scores[move].round(2))
print("chosen:", uct.select_move(result))

# %% [markdown]
# A short match. Forty games leave intervals of about 3 points, wider than
# the seat effect; raise ``n_games`` (500 at 180 rollouts takes about 25
# minutes on one core) to resolve it.

# %%
agent = AgentSpec("uct", n=60, c=0.8)
report = run_match(MatchSpec((agent,) * 3, n_games=40, seed=0))
print(report.format())
