# %% [markdown]
# # A tiny self-play run and its learning curve
#
# Each iteration generates games, appends them to a FIFO replay buffer and
# trains one epoch. Early iterations mix in UCT opponents (warm start).
# Everything is seeded: rerunning gives identical files.

# %%
import tempfile
from pathlib import Path

from mpgo.arena import AgentSpec, evaluation_checkpoints, learning_curve
from mpgo.selfplay import Pipeline, TrainConfig, warm_start_epsilon

print([round(warm_start_epsilon(i, 50), 2) for i in (0, 10, 20, 30, 50)])

# %%
run = Path(tempfile.mkdtemp()) / "run"
cfg = TrainConfig(variant="az", n_updates=3, n_games=4, n_envs=1, n_rollouts=16,
                  blocks=1, filters=16, value_hidden=16, lr=1e-3, seed=0)
Pipeline(cfg, run).run(on_iteration=lambda row: print(row))
print((run / "metrics.csv").read_text())

# %% [markdown]
# ## Learning curve
# Each evaluation checkpoint plays every seat against two UCT opponents.
# With this little training the curve is mostly noise; the interesting runs
# use the default configuration.

# %%
print([p.name for p in evaluation_checkpoints(run)])
rows = learning_curve(run, AgentSpec("uct", n=16), games_per_point=4, seed=0, n=16)
for r in rows:
    print(r)
