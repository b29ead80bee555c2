"""Computation time/energy and the per-task priority-weighted cost."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import RouteConflict, ValidationError


@dataclass(frozen=True)
class Task:
    device_index: int
    type_index: int
    data_size: float    # bits
    priority: float
    cpu_cycles: float

    def __post_init__(self):
        if self.data_size <= 0 or self.cpu_cycles <= 0:
            raise ValueError("tasks need positive data size and cycle count")


@dataclass(frozen=True)
class ComputeParams:
    f_loc: float = 100e6        # UAV CPU, Hz
    f_edg: float = 500e6        # MEC server CPU, Hz
    kappa_loc: float = 1e-16
    kappa_edg: float = 1e-22
    t_a: float = 0.01
    alpha: float = 0.5
    beta: float = 0.5
    charge_first_hop_on_offload: bool = False

    def validate(self):
        checks = [
            ("f_loc", self.f_loc > 0), ("f_edg", self.f_edg > 0),
            ("kappa_loc", self.kappa_loc >= 0), ("kappa_edg", self.kappa_edg >= 0),
            ("t_a", self.t_a >= 0), ("alpha", self.alpha >= 0), ("beta", self.beta >= 0),
            ("alpha", self.alpha + self.beta > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(name, f"invalid value {getattr(self, name)!r}")


@dataclass(frozen=True)
class TaskOutcome:
    processed_locally: bool
    target_node: Optional[int]
    total_delay: float
    total_energy: float
    weighted_cost: float


def compute_time(cycles: float, freq: float) -> float:
    if freq <= 0:
        raise ValueError("CPU frequency must be positive")
    return cycles / freq


def compute_energy(kappa: float, freq: float, cycles: float) -> float:
    if freq <= 0:
        raise ValueError("CPU frequency must be positive")
    return kappa * freq ** 2 * cycles


def weighted_cost(priority: float, delay: float, energy: float, alpha: float, beta: float) -> float:
    return priority * (alpha * delay + beta * energy)


def task_totals(task: Task, x: int, y: int, params: ComputeParams, *,
                t_ns: float, e_ns: float, compute_t: float, compute_e: float,
                t_ms: float = 0.0, e_ms: float = 0.0, target: Optional[int] = None) -> TaskOutcome:
    """Total delay, energy and weighted cost of one task.

    ``x`` flags local processing and ``y`` offloading; exactly one must be set.
    On the offload path the device's first-hop energy is charged only when
    ``params.charge_first_hop_on_offload`` is set.
    """
    if x not in (0, 1) or y not in (0, 1) or x + y != 1:
        raise RouteConflict(f"task of device {task.device_index}, type {task.type_index}: x={x}, y={y}")
    if x:
        delay = t_ns + params.t_a + compute_t
        energy = e_ns + compute_e
        target = None
    else:
        delay = t_ns + t_ms + params.t_a + compute_t
        energy = e_ms + compute_e
        if params.charge_first_hop_on_offload:
            energy += e_ns
    return TaskOutcome(bool(x), target, delay, energy,
                       weighted_cost(task.priority, delay, energy, params.alpha, params.beta))
