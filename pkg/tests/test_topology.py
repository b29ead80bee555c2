import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secure_offload.errors import ZeroDistance
from secure_offload.topology import (NetworkTopology, Position3D, distance, elevation_angle, generate_topology,
                                     nearest_association)

# 0.1 m grid keeps squared differences clear of underflow
coord = st.integers(0, 1000).map(lambda v: v / 10)
point = st.tuples(coord, coord, coord)


def test_distance_examples():
    assert distance((0, 0, 0), (0, 0, 0)) == 0
    assert distance((0, 0, 0), (3, 4, 0)) == 5
    assert distance((1, 2, 3), (4, 6, 15)) == 13


def test_elevation_examples():
    assert elevation_angle((0, 0, 0), (0, 0, 50)) == pytest.approx(90)
    assert elevation_angle((0, 0, 0), (50, 0, 50)) == pytest.approx(45)
    assert elevation_angle((0, 0, 0), (86.6025, 0, 50)) == pytest.approx(30, abs=1e-4)
    with pytest.raises(ZeroDistance):
        elevation_angle((1, 2, 3), (1, 2, 3))


@given(point, point)
def test_distance_symmetric(a, b):
    assert distance(a, b) == distance(b, a)
    assert (distance(a, b) == 0) == (tuple(a) == tuple(b))


@given(st.floats(1, 100), st.floats(0.1, 100), st.floats(0, 2 * math.pi))
def test_elevation_rotation_invariant(r, h, phi):
    base = elevation_angle((0, 0, 0), (r, 0, h))
    rotated = elevation_angle((0, 0, 0), (r * math.cos(phi), r * math.sin(phi), h))
    assert rotated == pytest.approx(base, rel=1e-9, abs=1e-9)


def test_single_uav_association():
    topo = generate_topology(7, 1, 1)
    assert topo.association == (0,)


def test_generation_deterministic():
    assert generate_topology(11, 10, 4) == generate_topology(11, 10, 4)
    assert generate_topology(11, 10, 4) != generate_topology(12, 10, 4)


def test_association_is_argmin():
    topo = generate_topology(3, 3, 2)
    for n, dev in enumerate(topo.device_positions):
        d = [distance(dev, u) for u in topo.uav_positions]
        assert topo.association[n] == int(np.argmin(d))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 15), st.integers(1, 6))
def test_topology_invariants(seed, n, m):
    topo = generate_topology(seed, n, m)
    assert len(topo.association) == n
    assert sum(topo.devices_per_uav) == n
    assert all(p.z == 0 for p in topo.device_positions)
    for p in list(topo.uav_positions) + [topo.mec_position, topo.eve_position]:
        assert 0 < p.z <= 100 and 0 <= p.x <= 100 and 0 <= p.y <= 100
    for n_idx, dev in enumerate(topo.device_positions):
        mine = distance(dev, topo.uav_positions[topo.association[n_idx]])
        assert all(mine <= distance(dev, u) for u in topo.uav_positions)
    assert topo.reassociate() == topo


def test_association_tie_goes_to_lowest_index():
    devs = [Position3D(0, 0, 0)]
    uavs = [Position3D(10, 0, 10), Position3D(-10, 0, 10)]
    assert nearest_association(devs, uavs) == (0,)


def test_text_round_trip():
    topo = generate_topology(5, 6, 3)
    assert NetworkTopology.from_text(topo.to_text()) == topo


def test_mec_override():
    topo = generate_topology(5, 6, 3, mec_position=(50.0, 50.0, 10.0))
    assert tuple(topo.mec_position) == (50.0, 50.0, 10.0)
    # the override must not perturb the rest of the draw
    plain = generate_topology(5, 6, 3)
    assert topo.uav_positions == plain.uav_positions and topo.eve_position == plain.eve_position
