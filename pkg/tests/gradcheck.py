"""Central finite differences against autograd on a reduced network (float64)."""
import numpy as np
import torch

from mpgo.engine import new_game
from mpgo.network import AZ, MultiGoNet, TrainBatch, encode_batch, loss_az, loss_descent


def _states(n, seed):
    rng = np.random.default_rng(seed)
    out, s = [], new_game()
    while len(out) < n:
        if s.is_terminal():
            s = new_game()
        out.append(s)
        ms = s.legal_moves()
        s = s.play(ms[rng.integers(len(ms))])
    return out[::-1]


def _head_params(net, variant):
    named = dict(net.named_parameters())
    if variant == AZ:
        return {"trunk": [k for k in named if k.startswith(("stem", "trunk"))],
                "policy": [k for k in named if k.startswith("policy_head")],
                "value": [k for k in named if k.startswith("value_heads")]}
    return {"trunk": [k for k in named if k.startswith(("stem", "trunk"))],
            "value": [k for k in named if k.startswith("score_head")]}


def check_gradients(variant, n_per_head=20, seed=0, eps=1e-5, floor=1e-5):
    """Largest relative error over ``n_per_head`` random weights per parameter group.

    Gradients smaller than ``floor`` are compared on an absolute scale: below it
    the float64 roundoff of a loss near 1e2 dominates the difference quotient.
    """
    rng = np.random.default_rng(seed)
    net = MultiGoNet(variant, blocks=1, filters=8, value_hidden=16, seed=seed).double()
    states = _states(6, seed)
    x = encode_batch(states)
    if variant == AZ:
        pol = rng.dirichlet(np.ones(25), len(states))
        batch = TrainBatch.az(x, rng.integers(0, 26, (len(states), 3)), pol).to(torch.float64)
        loss_fn = loss_az
    else:
        batch = TrainBatch.descent(x, rng.uniform(0, 25, (len(states), 3))).to(torch.float64)
        loss_fn = loss_descent
    net.zero_grad()
    loss_fn(net, batch).backward()
    named = dict(net.named_parameters())
    worst = 0.0
    for group, names in _head_params(net, variant).items():
        sizes = np.array([named[k].numel() for k in names])
        for _ in range(n_per_head):
            k = names[rng.choice(len(names), p=sizes / sizes.sum())]
            p = named[k]
            i = int(rng.integers(p.numel()))
            analytic = float(p.grad.view(-1)[i])
            with torch.no_grad():
                flat = p.view(-1)
                orig = float(flat[i])
                flat[i] = orig + eps
                up = float(loss_fn(net, batch))
                flat[i] = orig - eps
                down = float(loss_fn(net, batch))
                flat[i] = orig
            numeric = (up - down) / (2 * eps)
            denom = max(abs(analytic), abs(numeric), floor)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
