# %% [markdown]
# # Networks and guided search
#
# One residual trunk with two head variants: policy plus per-player score
# distributions (used by PUCT), or a direct per-player score regression
# (used by Descent). Small networks keep this quick.

# %%
import numpy as np
import torch

from mpgo.engine import new_game
from mpgo.network import (AZ, DESCENT, MultiGoNet, NetworkEvaluator, encode, expected_score,
                          forward_az, forward_descent, load_checkpoint, save_checkpoint)
from mpgo.search import DescentConfig, PuctConfig
from mpgo.search import descent, puct

state = new_game()
x = encode(state)
print("encoding:", x.shape, x.dtype)

# %%
az = MultiGoNet(AZ, blocks=2, filters=32, value_hidden=32, seed=0)
with torch.no_grad():
    policy, value = forward_az(az, x[None])
print("policy sums to", float(policy.sum()))
print("expected scores from an untrained net:", expected_score(value)[0].numpy().round(2))

de = MultiGoNet(DESCENT, blocks=2, filters=32, value_hidden=32, seed=0)
with torch.no_grad():
    print("descent values:", forward_descent(de, x[None])[0].numpy().round(2))

# %% [markdown]
# ## PUCT with network priors

# %%
result = puct.search(state, NetworkEvaluator(az), PuctConfig(n_simulations=60, temperature_moves=0))
target = puct.policy_target(result)
print("root visits:", result.total_visits(), " most visited point:", int(np.argmax(target)))

# %% [markdown]
# ## Descent
# Repeated best-first descents to terminal-or-leaf; the returned tree also
# yields regression targets for every expanded node.

# %%
move, root = descent.search(state, NetworkEvaluator(de), DescentConfig(budget=60))
targets = descent.collect_targets(root, include_terminal=True)
print("move:", move, " expansions:", descent.count_expansions(root), " targets:", len(targets))

# %% [markdown]
# ## Checkpoints round-trip exactly

# %%
import tempfile, pathlib
path = pathlib.Path(tempfile.mkdtemp()) / "az.ckpt"
save_checkpoint(path, az)
back = load_checkpoint(path).net
same = all(torch.equal(a, b) for a, b in zip(az.state_dict().values(), back.state_dict().values()))
print("identical after reload:", same)
