"""State encoding, residual policy/value networks, losses and checkpoints.

One residual trunk feeds either the AlphaZero heads (25 policy logits and
three 26-way score distributions) or the Descent head (three linear score
regressions). There is no batch normalisation and no pass output.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .engine import GameState

SIZE = 5
NUM_PLAYERS = 3
N_POINTS = SIZE * SIZE
N_BINS = 26
L2_WEIGHT = 1e-4
CHECKPOINT_VERSION = 1
_MAGIC = b"MPGOCKPT"

AZ, DESCENT = "az", "descent"


class EncodingError(ValueError):
    pass


class CorruptCheckpoint(ValueError):
    pass


class UnsupportedVersion(ValueError):
    pass


class TrainingDiverged(FloatingPointError):
    pass


# -- encoding ---------------------------------------------------------------

def encode(state: GameState) -> np.ndarray:
    """Six 5x5 planes: stones of players 0-2, then a constant plane per player to move."""
    if state.size != SIZE or state.num_players != NUM_PLAYERS:
        raise EncodingError(f"encoding is defined for {SIZE}x{SIZE} {NUM_PLAYERS}-player games")
    planes = np.zeros((2 * NUM_PLAYERS, SIZE, SIZE), dtype=np.float32)
    grid = state.board.reshape(SIZE, SIZE)
    for p in range(NUM_PLAYERS):
        planes[p] = grid == p + 1
    planes[NUM_PLAYERS + state.to_move] = 1.0
    return planes


def encode_batch(states: Sequence[GameState]) -> np.ndarray:
    return np.stack([encode(s) for s in states]) if states else np.zeros((0, 6, SIZE, SIZE), np.float32)


# -- model ------------------------------------------------------------------

class ResidualBlock(nn.Module):
    def __init__(self, filters: int, kernel: int = 3):
        super().__init__()
        self.conv1 = nn.Conv2d(filters, filters, kernel, padding=kernel // 2)
        self.conv2 = nn.Conv2d(filters, filters, kernel, padding=kernel // 2)

    def forward(self, x):
        out = F.relu(self.conv1(x))
        return F.relu(self.conv2(out) + x)


class MultiGoNet(nn.Module):
    """Residual trunk plus the heads of one variant (``"az"`` or ``"descent"``)."""

    def __init__(self, variant: str = AZ, blocks: int = 8, filters: int = 128,
                 value_hidden: int = 128, seed: int = 0):
        super().__init__()
        if variant not in (AZ, DESCENT):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.blocks, self.filters, self.value_hidden, self.seed = blocks, filters, value_hidden, seed
        flat = filters * N_POINTS
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.stem = nn.Conv2d(2 * NUM_PLAYERS, filters, 3, padding=1)
            self.trunk = nn.Sequential(*[ResidualBlock(filters) for _ in range(blocks)])
            if variant == AZ:
                self.policy_head = nn.Conv2d(filters, 1, 1)
                self.value_heads = nn.ModuleList(
                    nn.Sequential(nn.Linear(flat, value_hidden), nn.ReLU(),
                                  nn.Linear(value_hidden, N_BINS))
                    for _ in range(NUM_PLAYERS))
            else:
                self.score_head = nn.Sequential(nn.Linear(flat, value_hidden), nn.ReLU(),
                                                nn.Linear(value_hidden, NUM_PLAYERS))

    def config(self) -> dict:
        return {"variant": self.variant, "blocks": self.blocks, "filters": self.filters,
                "value_hidden": self.value_hidden, "seed": self.seed}

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.trunk(F.relu(self.stem(x)))

    def az_logits(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Policy logits ``(B, 25)`` and value logits ``(B, 3, 26)``."""
        h = self.features(x)
        policy = self.policy_head(h).flatten(1)
        flat = h.flatten(1)
        value = torch.stack([head(flat) for head in self.value_heads], dim=1)
        return policy, value

    def forward(self, x):
        if self.variant == AZ:
            return self.az_logits(x)
        return self.score_head(self.features(x).flatten(1))


def _as_tensor(net: nn.Module, x) -> torch.Tensor:
    dtype = next(net.parameters()).dtype
    x = torch.as_tensor(np.asarray(x) if not isinstance(x, torch.Tensor) else x, dtype=dtype)
    if x.dim() != 4 or tuple(x.shape[1:]) != (2 * NUM_PLAYERS, SIZE, SIZE):
        raise ValueError(f"expected encodings of shape (B, 6, 5, 5), got {tuple(x.shape)}")
    return x


def forward_az(net: MultiGoNet, x) -> tuple[torch.Tensor, torch.Tensor]:
    """Move probabilities ``(B, 25)`` and score distributions ``(B, 3, 26)``."""
    if net.variant != AZ:
        raise ValueError("forward_az needs an AlphaZero network")
    policy, value = net.az_logits(_as_tensor(net, x))
    return F.softmax(policy, dim=-1), F.softmax(value, dim=-1)


def forward_descent(net: MultiGoNet, x) -> torch.Tensor:
    """Unbounded predicted scores ``(B, 3)``."""
    if net.variant != DESCENT:
        raise ValueError("forward_descent needs a Descent network")
    return net(_as_tensor(net, x))


def expected_score(value_dist):
    """Mean of a 26-bin score distribution along the last axis."""
    bins = np.arange(N_BINS)
    if isinstance(value_dist, torch.Tensor):
        return (value_dist * torch.arange(N_BINS, dtype=value_dist.dtype)).sum(-1)
    return np.asarray(value_dist) @ bins


# -- training ---------------------------------------------------------------

@dataclass
class TrainBatch:
    """Training tensors. ``values`` is ``(B, 3, 26)`` one-hot for AZ, ``(B, 3)`` for Descent."""

    encodings: torch.Tensor
    values: torch.Tensor
    policies: torch.Tensor | None = None
    policy_mask: torch.Tensor | None = None

    @classmethod
    def az(cls, encodings, scores, policies, policy_mask=None) -> "TrainBatch":
        scores = np.clip(np.rint(np.asarray(scores)), 0, N_BINS - 1).astype(np.int64)
        onehot = F.one_hot(torch.as_tensor(scores), N_BINS).float()
        policies = torch.as_tensor(np.asarray(policies), dtype=torch.float32)
        if policy_mask is None:
            policy_mask = torch.ones(len(policies))
        pol_sum = policies.sum(-1)
        m = torch.as_tensor(np.asarray(policy_mask), dtype=torch.float32)
        if (policies < 0).any() or not torch.allclose(pol_sum[m > 0], torch.ones_like(pol_sum[m > 0]), atol=1e-5):
            raise ValueError("policy targets must be probability vectors")
        return cls(torch.as_tensor(np.asarray(encodings), dtype=torch.float32), onehot, policies, m)

    @classmethod
    def descent(cls, encodings, values) -> "TrainBatch":
        v = np.asarray(values, dtype=np.float32)
        if v.ndim != 2 or v.shape[1] != NUM_PLAYERS:
            raise ValueError("descent targets must be (B, 3)")
        return cls(torch.as_tensor(np.asarray(encodings), dtype=torch.float32), torch.as_tensor(v))

    def to(self, dtype) -> "TrainBatch":
        conv = lambda t: None if t is None else t.to(dtype)
        return TrainBatch(conv(self.encodings), conv(self.values), conv(self.policies),
                          conv(self.policy_mask))


def l2_penalty(net: nn.Module) -> torch.Tensor:
    """Sum of squared convolution and dense weights (biases excluded)."""
    return sum((p * p).sum() for name, p in net.named_parameters() if name.endswith("weight"))


def az_cross_entropies(net: MultiGoNet, batch: TrainBatch) -> tuple[torch.Tensor, torch.Tensor]:
    policy_logits, value_logits = net.az_logits(batch.encodings.to(next(net.parameters()).dtype))
    logp = F.log_softmax(policy_logits, -1)
    per_sample = -(batch.policies.to(logp.dtype) * logp).sum(-1)
    mask = batch.policy_mask.to(logp.dtype)
    policy_ce = (per_sample * mask).sum() / mask.sum().clamp(min=1.0)
    value_ce = -(batch.values.to(logp.dtype) * F.log_softmax(value_logits, -1)).sum(-1).sum(-1).mean()
    return policy_ce, value_ce


def loss_az(net: MultiGoNet, batch: TrainBatch) -> torch.Tensor:
    policy_ce, value_ce = az_cross_entropies(net, batch)
    return policy_ce + value_ce + L2_WEIGHT * l2_penalty(net)


def descent_mse(net: MultiGoNet, batch: TrainBatch) -> torch.Tensor:
    pred = net(batch.encodings.to(next(net.parameters()).dtype))
    return ((pred - batch.values.to(pred.dtype)) ** 2).mean()


def loss_descent(net: MultiGoNet, batch: TrainBatch) -> torch.Tensor:
    return descent_mse(net, batch) + L2_WEIGHT * l2_penalty(net)


def make_optimizer(net: MultiGoNet, lr: float = 1e-4, momentum: float = 0.9) -> torch.optim.Optimizer:
    """SGD for AlphaZero, Adam for Descent."""
    if net.variant == AZ:
        return torch.optim.SGD(net.parameters(), lr=lr, momentum=momentum)
    return torch.optim.Adam(net.parameters(), lr=lr)


def train_step(net: MultiGoNet, optimizer: torch.optim.Optimizer, batch: TrainBatch) -> float:
    """One gradient step on the variant's loss, in place; returns the loss before the step."""
    net.train()
    optimizer.zero_grad(set_to_none=True)
    loss = loss_az(net, batch) if net.variant == AZ else loss_descent(net, batch)
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"non-finite {net.variant} loss: {loss.item()}")
    loss.backward()
    optimizer.step()
    return float(loss.detach())


# -- inference --------------------------------------------------------------

class NetworkEvaluator:
    """Adapts a network to the search evaluator interface."""

    def __init__(self, net: MultiGoNet):
        self.net = net.eval()
        self.calls = 0

    @torch.inference_mode()
    def evaluate(self, states: Sequence[GameState]) -> tuple[np.ndarray, np.ndarray]:
        self.calls += 1
        policy, value = forward_az(self.net, encode_batch(states))
        return policy.double().numpy(), expected_score(value.double()).numpy()

    @torch.inference_mode()
    def values(self, states: Sequence[GameState]) -> np.ndarray:
        self.calls += 1
        return forward_descent(self.net, encode_batch(states)).double().numpy()


# -- checkpoints ------------------------------------------------------------

@dataclass
class Checkpoint:
    net: MultiGoNet
    iteration: int = 0
    optimizer_state: dict[str, torch.Tensor] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def make_optimizer(self) -> torch.optim.Optimizer:
        opt = make_optimizer(self.net, **self.meta.get("optimizer", {}))
        if self.optimizer_state:
            opt.load_state_dict(_unflatten_optimizer(opt, self.optimizer_state))
        return opt


def _flatten_optimizer(opt: torch.optim.Optimizer | None) -> dict[str, torch.Tensor]:
    if opt is None:
        return {}
    out = {}
    for idx, st in sorted(opt.state_dict()["state"].items()):
        for key in sorted(st):
            val = st[key]
            if val is None:
                continue
            out[f"{idx}.{key}"] = torch.as_tensor(val, dtype=torch.float32)
    return out


def _unflatten_optimizer(opt: torch.optim.Optimizer, flat: dict[str, torch.Tensor]) -> dict:
    sd = opt.state_dict()
    state: dict[int, dict] = {}
    for name, t in flat.items():
        idx, key = name.split(".", 1)
        state.setdefault(int(idx), {})[key] = t.clone()
    sd["state"] = state
    return sd


def _optimizer_hparams(opt: torch.optim.Optimizer | None) -> dict:
    if opt is None:
        return {}
    g = opt.param_groups[0]
    hp = {"lr": g["lr"]}
    if "momentum" in g:
        hp["momentum"] = g["momentum"]
    return hp


def save_checkpoint(path: str | Path, net: MultiGoNet, optimizer: torch.optim.Optimizer | None = None,
                    iteration: int = 0, extra: dict | None = None) -> None:
    """Write params and optimizer state as little-endian float32 named tensors."""
    meta = {"net": net.config(), "optimizer": _optimizer_hparams(optimizer), **(extra or {})}
    tensors = [("param." + k, v) for k, v in net.state_dict().items()]
    tensors += [("opt." + k, v) for k, v in _flatten_optimizer(optimizer).items()]
    meta_b = json.dumps(meta, sort_keys=True).encode()
    parts = [_MAGIC, struct.pack("<III", CHECKPOINT_VERSION, iteration, len(meta_b)), meta_b,
             struct.pack("<I", len(tensors))]
    for name, t in tensors:
        nb = name.encode()
        arr = t.detach().cpu().numpy().astype("<f4")
        parts += [struct.pack("<H", len(nb)), nb, struct.pack("<B", arr.ndim),
                  struct.pack(f"<{arr.ndim}I", *arr.shape), arr.tobytes()]
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    head = len(_MAGIC) + 12
    if len(data) < head + 4 or data[:len(_MAGIC)] != _MAGIC:
        raise CorruptCheckpoint(f"{path}: not a checkpoint or truncated")
    version, iteration, meta_len = struct.unpack_from("<III", data, len(_MAGIC))
    if version > CHECKPOINT_VERSION:
        raise UnsupportedVersion(f"{path}: checkpoint version {version} > {CHECKPOINT_VERSION}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptCheckpoint(f"{path}: checksum mismatch (truncated or damaged)")
    try:
        off = head
        meta = json.loads(body[off:off + meta_len])
        off += meta_len
        (n,) = struct.unpack_from("<I", body, off)
        off += 4
        params, opt = {}, {}
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", body, off)
            off += 2
            name = body[off:off + ln].decode()
            off += ln
            (ndim,) = struct.unpack_from("<B", body, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", body, off)
            off += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(body, dtype="<f4", count=count, offset=off).reshape(shape)
            off += 4 * count
            t = torch.from_numpy(arr.astype(np.float32))
            if name.startswith("param."):
                params[name[6:]] = t
            else:
                opt[name[4:]] = t
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise CorruptCheckpoint(f"{path}: {e}") from e
    net = MultiGoNet(**meta["net"])
    net.load_state_dict(params)
    return Checkpoint(net, iteration, opt, meta, version)
