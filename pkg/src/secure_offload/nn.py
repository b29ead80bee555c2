"""Dense ReLU Q-network with hand-written backpropagation and Adam.

A ``QNetwork`` may hold several independent members that share a layout
(one per UAV); they are evaluated and trained together with batched matrix
products. Every parameter array carries the member axis first. Member inputs
have shape ``(members, batch, in)``; a single-member network also accepts
``(batch, in)`` and ``(in,)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss

CHECKPOINT_MAGIC = "qnetwork-checkpoint"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class QNetwork:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]            # (members, fan_in, fan_out)
    biases: list[np.ndarray]             # (members, fan_out)
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not self.m_w:
            self.m_w = [np.zeros_like(w) for w in self.weights]
            self.v_w = [np.zeros_like(w) for w in self.weights]
            self.m_b = [np.zeros_like(b) for b in self.biases]
            self.v_b = [np.zeros_like(b) for b in self.biases]

    @property
    def members(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "QNetwork":
        return QNetwork(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def checksum(self) -> float:
        return float(sum(np.sum(p) + np.sum(p * p) for p in self.params()))


def init_network(layer_dims: Sequence[int], seed: int, members: int = 1) -> QNetwork:
    """He-scaled uniform weights (variance 2/fan_in), zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims) or members < 1:
        raise ValueError(f"bad layer dims {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(members, fan_in, fan_out)))
        biases.append(np.zeros((members, fan_out)))
    return QNetwork(dims, weights, biases)


def _as_members(net: QNetwork, x) -> tuple[np.ndarray, int]:
    """Lift input to (members, batch, in); also return its original rank."""
    x = np.asarray(x, dtype=np.float64)
    ndim = x.ndim
    if ndim == 1:
        x = x[None, None, :]
    elif ndim == 2:
        x = x[None, :, :]
    if x.ndim != 3 or x.shape[-1] != net.layer_dims[0]:
        raise DimensionMismatch(f"expected input width {net.layer_dims[0]}, got shape {np.shape(x)}")
    if ndim < 3 and net.members != 1:
        x = np.broadcast_to(x, (net.members,) + x.shape[1:])
    if x.shape[0] != net.members:
        raise DimensionMismatch(f"expected {net.members} members, got {x.shape[0]}")
    return x, ndim


def _activations(net: QNetwork, x: np.ndarray) -> list[np.ndarray]:
    # per-member 2D products hit BLAS directly; stacked matmul is markedly slower here
    g_count, batch = x.shape[0], x.shape[1]
    acts = [x]
    last = len(net.weights) - 1
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = np.empty((g_count, batch, w.shape[2]))
        for g in range(g_count):
            np.matmul(h[g], w[g], out=z[g])
        z += b[:, None, :]
        if i != last:
            np.maximum(z, 0.0, out=z)
        acts.append(z)
        h = z
    return acts


def forward(net: QNetwork, features) -> np.ndarray:
    x, ndim = _as_members(net, features)
    q = _activations(net, x)[-1]
    if ndim == 1:
        return q[0, 0]
    if ndim == 2 and net.members == 1:
        return q[0]
    return q


def _targets_as_members(net: QNetwork, arr, batch: int, name: str, dtype) -> np.ndarray:
    a = np.asarray(arr, dtype=dtype)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim == 1:
        a = np.broadcast_to(a[None, :], (net.members, a.shape[0]))
    if a.shape != (net.members, batch):
        raise DimensionMismatch(f"{name} has shape {a.shape}, expected {(net.members, batch)}")
    return a


def loss_and_gradients(net: QNetwork, features, actions, targets):
    """Mean squared TD error on the chosen outputs, per member, and its gradients.

    Returns ``(loss_per_member, grad_w, grad_b)``. The gradient is that of the
    sum of member losses, so members stay independent.
    """
    x, _ = _as_members(net, features)
    g, batch = x.shape[0], x.shape[1]
    if batch == 0:
        raise ValueError("empty batch")
    a = _targets_as_members(net, actions, batch, "actions", np.int64)
    y = _targets_as_members(net, targets, batch, "targets", np.float64)
    if np.any(a < 0) or np.any(a >= net.n_outputs):
        raise IndexError("action index out of range")
    acts = _activations(net, x)
    q = acts[-1]
    rows = np.arange(g)[:, None]
    cols = np.arange(batch)[None, :]
    chosen = q[rows, cols, a]
    err = chosen - y
    if not (np.all(np.isfinite(err)) and np.all(np.isfinite(q))):
        raise NonFiniteLoss("non-finite target or activation")
    loss = np.mean(err * err, axis=1)

    delta = np.zeros_like(q)
    delta[rows, cols, a] = 2.0 * err / batch
    grad_w = [None] * len(net.weights)
    grad_b = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        w = net.weights[i]
        grad_w[i] = np.empty_like(w)
        for gi in range(g):
            np.matmul(acts[i][gi].T, delta[gi], out=grad_w[i][gi])
        grad_b[i] = delta.sum(axis=1)
        if i > 0:
            upstream = np.empty_like(acts[i])
            for gi in range(g):
                np.matmul(delta[gi], w[gi].T, out=upstream[gi])
            upstream *= acts[i] > 0.0
            delta = upstream
    return loss, grad_w, grad_b


def adam_update(net: QNetwork, grad_w, grad_b, lr: float):
    net.step += 1
    c1 = 1.0 - ADAM_BETA1 ** net.step
    c2 = 1.0 - ADAM_BETA2 ** net.step
    for params, grads, ms, vs in ((net.weights, grad_w, net.m_w, net.v_w),
                                  (net.biases, grad_b, net.m_b, net.v_b)):
        for p, gr, m, v in zip(params, grads, ms, vs):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * gr
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * gr * gr
            p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def train_step(net: QNetwork, batch_features, batch_actions, batch_targets, lr: float = 1e-4):
    """One Adam step on the squared TD error; returns the pre-update loss.

    The loss is a float for a single-member network and an array with one
    entry per member otherwise.
    """
    loss, grad_w, grad_b = loss_and_gradients(net, batch_features, batch_actions, batch_targets)
    adam_update(net, grad_w, grad_b, lr)
    return float(loss[0]) if net.members == 1 else loss


def sync_target(online: QNetwork, target: QNetwork):
    if online.layer_dims != target.layer_dims or online.members != target.members:
        raise DimensionMismatch("online and target networks differ in shape")
    for dst, src in zip(target.params(), online.params()):
        np.copyto(dst, src)


def total_loss(net: QNetwork, features, actions, targets) -> float:
    x, _ = _as_members(net, features)
    a = _targets_as_members(net, actions, x.shape[1], "actions", np.int64)
    y = _targets_as_members(net, targets, x.shape[1], "targets", np.float64)
    q = _activations(net, x)[-1]
    chosen = q[np.arange(x.shape[0])[:, None], np.arange(x.shape[1])[None, :], a]
    return float(np.sum(np.mean((chosen - y) ** 2, axis=1)))


def finite_diff_gradient(net: QNetwork, features, action_index, target, h: float = 1e-5):
    """Central-difference estimate of the loss gradient, laid out like ``params()``."""
    if h <= 0:
        raise ValueError("step must be positive")
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = total_loss(net, features, action_index, target)
            flat[i] = orig - h
            down = total_loss(net, features, action_index, target)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def analytic_gradient(net: QNetwork, features, action_index, target):
    _, gw, gb = loss_and_gradients(net, features, action_index, target)
    return [p for pair in zip(gw, gb) for p in pair]


def kink_distance(net: QNetwork, features) -> float:
    """Smallest |pre-activation| over hidden units; small values sit near a ReLU kink."""
    x, _ = _as_members(net, features)
    h = x
    closest = np.inf
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = np.matmul(h, w) + b[:, None, :]
        closest = min(closest, float(np.min(np.abs(z))))
        h = np.maximum(z, 0.0)
    return closest


# ---------------------------------------------------------------- checkpoints
#
# Text format, version 1:
#   qnetwork-checkpoint 1
#   members <G>
#   dims <d0> <d1> ... <dL>
#   then, per member and per layer, "weight <g> <l>" followed by fan_in rows of
#   fan_out values, and "bias <g> <l>" followed by one row. Values use repr()
#   so a save/load round trip is exact.

def save_checkpoint(net: QNetwork, path):
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}", f"members {net.members}",
             "dims " + " ".join(str(d) for d in net.layer_dims)]
    for g in range(net.members):
        for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
            lines.append(f"weight {g} {layer}")
            lines.extend(" ".join(repr(float(v)) for v in row) for row in w[g])
            lines.append(f"bias {g} {layer}")
            lines.append(" ".join(repr(float(v)) for v in b[g]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> QNetwork:
    lines = Path(path).read_text().splitlines()
    magic, version = lines[0].split()
    if magic != CHECKPOINT_MAGIC or int(version) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint header {lines[0]!r}")
    members = int(lines[1].split()[1])
    dims = tuple(int(v) for v in lines[2].split()[1:])
    weights = [np.zeros((members, a, b)) for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros((members, b)) for b in dims[1:]]
    pos = 3
    for g in range(members):
        for layer in range(len(weights)):
            assert lines[pos] == f"weight {g} {layer}", lines[pos]
            rows = dims[layer]
            weights[layer][g] = [[float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)]
            pos += 1 + rows
            assert lines[pos] == f"bias {g} {layer}", lines[pos]
            biases[layer][g] = [float(v) for v in lines[pos + 1].split()]
            pos += 2
    return QNetwork(dims, weights, biases)
