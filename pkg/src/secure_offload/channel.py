"""Air-to-ground propagation, Shannon rates, secrecy rates and transmission cost.

All quantities are SI: watts, hertz, bits, seconds, joules. Gains and losses
are linear factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InfeasibleSecrecy, ValidationError, ZeroDistance
from .topology import distance, elevation_angle

# Rounded value; K0 at 2.4 GHz is then 100.53 per metre. Use 2.998e8 for the finer figure.
SPEED_OF_LIGHT = 3.0e8


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    a: float = 11.25
    b: float = 0.06
    eta_los: float = 1.0
    eta_nlos: float = 10.0
    carrier_freq: float = 2.4e9
    path_loss_exp: float = 3.0
    bandwidth: float = 20e6
    noise_power: float = dbm_to_watts(-96.0)
    p_device: float = dbm_to_watts(15.0)
    p_uav: float = dbm_to_watts(23.0)
    # Weight the LoS-only UAV-to-target loss by the LoS probability, as the
    # original gain expression for that hop is printed.
    m2q_los_weighted: bool = False
    speed_of_light: float = SPEED_OF_LIGHT

    def validate(self):
        checks = [
            ("a", self.a > 0), ("b", self.b > 0),
            ("eta_los", self.eta_los > 0), ("eta_nlos", self.eta_nlos >= self.eta_los),
            ("carrier_freq", self.carrier_freq > 0), ("path_loss_exp", self.path_loss_exp >= 2),
            ("bandwidth", self.bandwidth > 0), ("noise_power", self.noise_power > 0),
            ("p_device", self.p_device > 0), ("p_uav", self.p_uav > 0),
            ("speed_of_light", self.speed_of_light > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(name, f"invalid value {getattr(self, name)!r}")

    @property
    def k0(self) -> float:
        return propagation_constant(self.carrier_freq, self.speed_of_light)


@dataclass(frozen=True)
class SecrecyLink:
    legit_rate: float
    eve_rate: float
    secrecy_rate: float


def propagation_constant(carrier_freq: float, speed_of_light: float = SPEED_OF_LIGHT) -> float:
    """K0 = 4*pi*f_c / c, in 1/m."""
    return 4.0 * math.pi * carrier_freq / speed_of_light


def los_probability(theta: float, params: ChannelParams) -> float:
    if not 0.0 <= theta <= 90.0:
        raise ValueError(f"elevation angle {theta} outside [0, 90] degrees")
    return 1.0 / (1.0 + params.a * math.exp(-params.b * (theta - params.a)))


def mean_path_loss(p_los: float, dist: float, params: ChannelParams, los_only: bool = False) -> float:
    """Average excess path loss; the channel gain is its reciprocal."""
    if dist <= 0.0:
        raise ZeroDistance("path loss needs a positive distance")
    spread = (params.k0 * dist) ** params.path_loss_exp
    if los_only:
        return params.eta_los * spread
    return (params.eta_los * p_los + params.eta_nlos * (1.0 - p_los)) * spread


def link_rate(bandwidth: float, share_count: int, tx_power: float, gain: float, noise: float) -> float:
    if share_count < 1:
        raise ValueError("share_count must be >= 1")
    return (bandwidth / share_count) * math.log2(1.0 + tx_power * gain / noise)


def secrecy_rate(legit: float, eavesdrop: float) -> float:
    return max(legit - eavesdrop, 0.0)


def secure_tx_time(data_size: float, secrecy: float) -> float:
    if data_size == 0:
        return 0.0
    if secrecy <= 0.0:
        raise InfeasibleSecrecy(f"cannot send {data_size} bits over a zero-secrecy link")
    return data_size / secrecy


def tx_energy(tx_power: float, time: float) -> float:
    return tx_power * time


def ground_to_air_gain(ground: Sequence[float], air: Sequence[float], params: ChannelParams) -> float:
    p_los = los_probability(elevation_angle(ground, air), params)
    return 1.0 / mean_path_loss(p_los, distance(ground, air), params)


def air_to_air_gain(src: Sequence[float], dst: Sequence[float], params: ChannelParams) -> float:
    loss = mean_path_loss(1.0, distance(src, dst), params, los_only=True)
    if params.m2q_los_weighted:
        loss *= los_probability(elevation_angle(src, dst), params)
    return 1.0 / loss


def n2m_link(device: Sequence[float], uav: Sequence[float], eve: Sequence[float],
             share_count: int, params: ChannelParams) -> SecrecyLink:
    """First hop: device uplink to its UAV, overheard by Eve."""
    legit = link_rate(params.bandwidth, share_count, params.p_device,
                      ground_to_air_gain(device, uav, params), params.noise_power)
    leak = link_rate(params.bandwidth, share_count, params.p_device,
                     ground_to_air_gain(device, eve, params), params.noise_power)
    return SecrecyLink(legit, leak, secrecy_rate(legit, leak))


def m2q_link(uav: Sequence[float], target: Sequence[float], eve: Sequence[float],
             share_count: int, params: ChannelParams) -> SecrecyLink:
    """Second hop: UAV to another UAV or the MEC server, LoS only."""
    legit = link_rate(params.bandwidth, share_count, params.p_uav,
                      air_to_air_gain(uav, target, params), params.noise_power)
    leak = link_rate(params.bandwidth, share_count, params.p_uav,
                     air_to_air_gain(uav, eve, params), params.noise_power)
    return SecrecyLink(legit, leak, secrecy_rate(legit, leak))
