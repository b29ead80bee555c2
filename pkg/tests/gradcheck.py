"""Analytic-vs-finite-difference gradient comparison shared by unit and acceptance tests."""

import numpy as np

from secure_offload import nn

KINK_MARGIN = 1e-6
STEP = 1e-5
ABS_FLOOR = 1e-7


def random_case(rng: np.random.Generator, members: int = 1):
    """A small random net with a batch that keeps every hidden unit away from its kink."""
    depth = int(rng.integers(1, 4))
    dims = [int(rng.integers(3, 12))] + [int(rng.integers(2, 17)) for _ in range(depth)] + [int(rng.integers(2, 9))]
    net = nn.init_network(dims, int(rng.integers(0, 2 ** 31)), members=members)
    for b in net.biases:
        b[...] = rng.normal(0, 0.1, size=b.shape)
    batch = int(rng.integers(1, 9))
    while True:
        x = rng.normal(size=(members, batch, dims[0])) if members > 1 else rng.normal(size=(batch, dims[0]))
        # kink exclusion: redraw inputs whose pre-activations sit within the margin of zero
        if nn.kink_distance(net, x) >= KINK_MARGIN:
            break
    shape = (members, batch) if members > 1 else (batch,)
    actions = rng.integers(0, dims[-1], size=shape)
    targets = rng.normal(size=shape)
    return net, x, actions, targets


def max_relative_error(net, x, actions, targets) -> float:
    analytic = nn.analytic_gradient(net, x, actions, targets)
    numeric = nn.finite_diff_gradient(net, x, actions, targets, h=STEP)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), ABS_FLOOR)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
