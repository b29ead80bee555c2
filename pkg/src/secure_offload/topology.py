"""Random 3D deployment of IoT devices, UAVs, the MEC server and the eavesdropper."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ZeroDistance


class Position3D(NamedTuple):
    x: float
    y: float
    z: float


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def elevation_angle(ground: Sequence[float], air: Sequence[float]) -> float:
    """Elevation of ``air`` seen from ``ground``, in degrees.

    Uses the absolute height difference, so the angle between two airborne
    nodes is symmetric.
    """
    d = distance(ground, air)
    if d == 0.0:
        raise ZeroDistance(f"coincident positions {tuple(ground)}")
    ratio = min(1.0, abs(air[2] - ground[2]) / d)
    return math.degrees(math.asin(ratio))


def nearest_association(devices: Sequence[Position3D], uavs: Sequence[Position3D]) -> tuple[int, ...]:
    """Index of the closest UAV for every device (lowest index wins ties)."""
    assoc = []
    for dev in devices:
        dists = [distance(dev, u) for u in uavs]
        assoc.append(int(np.argmin(dists)))  # argmin returns the first minimum
    return tuple(assoc)


@dataclass(frozen=True)
class NetworkTopology:
    device_positions: tuple[Position3D, ...]
    uav_positions: tuple[Position3D, ...]
    mec_position: Position3D
    eve_position: Position3D
    association: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.association:
            object.__setattr__(self, "association",
                               nearest_association(self.device_positions, self.uav_positions))
        if len(self.association) != len(self.device_positions):
            raise ValueError("association must cover every device")

    @property
    def n_devices(self) -> int:
        return len(self.device_positions)

    @property
    def n_uavs(self) -> int:
        return len(self.uav_positions)

    @property
    def devices_per_uav(self) -> tuple[int, ...]:
        counts = [0] * self.n_uavs
        for m in self.association:
            counts[m] += 1
        return tuple(counts)

    def devices_of(self, uav: int) -> list[int]:
        return [n for n, m in enumerate(self.association) if m == uav]

    def reassociate(self) -> "NetworkTopology":
        return NetworkTopology(self.device_positions, self.uav_positions,
                               self.mec_position, self.eve_position)

    def to_text(self) -> str:
        lines = ["# kind index x y z"]
        for i, p in enumerate(self.device_positions):
            lines.append(_node_line("device", i, p))
        for i, p in enumerate(self.uav_positions):
            lines.append(_node_line("uav", i, p))
        lines.append(_node_line("mec", 0, self.mec_position))
        lines.append(_node_line("eve", 0, self.eve_position))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NetworkTopology":
        nodes: dict[str, dict[int, Position3D]] = {"device": {}, "uav": {}, "mec": {}, "eve": {}}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            kind, idx, x, y, z = line.split()
            if kind not in nodes:
                raise ValueError(f"unknown node kind {kind!r}")
            nodes[kind][int(idx)] = Position3D(float(x), float(y), float(z))
        devices = tuple(nodes["device"][i] for i in range(len(nodes["device"])))
        uavs = tuple(nodes["uav"][i] for i in range(len(nodes["uav"])))
        return cls(devices, uavs, nodes["mec"][0], nodes["eve"][0])


def _node_line(kind: str, idx: int, p: Position3D) -> str:
    return f"{kind} {idx} {p.x!r} {p.y!r} {p.z!r}"


def _airborne(rng: np.random.Generator, bounds: Sequence[float]) -> Position3D:
    x = rng.uniform(0.0, bounds[0])
    y = rng.uniform(0.0, bounds[1])
    # uniform on (0, z_max]
    z = bounds[2] - rng.uniform(0.0, bounds[2])
    return Position3D(float(x), float(y), float(z))


def generate_topology(seed: int, n_devices: int, n_uavs: int,
                      bounds: Sequence[float] = (100.0, 100.0, 100.0),
                      mec_position: Sequence[float] | None = None) -> NetworkTopology:
    """Uniform random deployment; devices sit on the ground plane."""
    if n_devices < 1 or n_uavs < 1:
        raise ValueError("need at least one device and one UAV")
    if any(b <= 0 for b in bounds):
        raise ValueError("bounds must be positive")
    # separate streams: the same seed keeps the airborne nodes fixed and the
    # first devices unchanged when more devices are added
    air = np.random.default_rng([seed, 0])
    ground = np.random.default_rng([seed, 1])
    uavs = tuple(_airborne(air, bounds) for _ in range(n_uavs))
    mec = _airborne(air, bounds)
    if mec_position is not None:
        mec = Position3D(*map(float, mec_position))
    eve = _airborne(air, bounds)
    devices = tuple(Position3D(float(ground.uniform(0.0, bounds[0])), float(ground.uniform(0.0, bounds[1])), 0.0)
                    for _ in range(n_devices))
    return NetworkTopology(devices, uavs, mec, eve)
