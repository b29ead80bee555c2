import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import reference as ref
from secure_offload import channel as ch
from secure_offload.errors import InfeasibleSecrecy, ValidationError, ZeroDistance

P = ch.ChannelParams()


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_table_defaults():
    assert P.carrier_freq == 2.4e9 and P.bandwidth == 20e6 and P.path_loss_exp == 3
    assert P.noise_power == pytest.approx(ref.watts(-96), rel=1e-12)
    assert P.p_device == pytest.approx(ref.watts(15), rel=1e-12)
    assert P.p_uav == pytest.approx(ref.watts(23), rel=1e-12)


def test_los_examples():
    assert ch.los_probability(11.25, P) == 1 / 12.25
    assert ch.los_probability(90, P) == pytest.approx(0.9093, abs=1e-4)
    assert ch.los_probability(45, P) == pytest.approx(0.4024, abs=1e-4)


def test_path_loss_examples():
    assert ch.propagation_constant(2.4e9) == pytest.approx(100.53, abs=1e-2)
    same = ch.ChannelParams(eta_los=4.0, eta_nlos=4.0)
    assert ch.mean_path_loss(0.2, 3.0, same) == pytest.approx(ch.mean_path_loss(0.9, 3.0, same), rel=1e-15)
    # choose dist so that (K0 d)^3 = 1000
    d = 10.0 / P.k0
    three = ch.ChannelParams(eta_los=1.0, eta_nlos=3.0)
    assert ch.mean_path_loss(0.5, d, three) == pytest.approx(2000, rel=1e-12)
    with pytest.raises(ZeroDistance):
        ch.mean_path_loss(0.5, 0.0, P)


def test_rate_examples():
    assert ch.link_rate(20e6, 1, 1.0, 0.0, 1.0) == 0
    assert ch.link_rate(20e6, 2, 3.0, 1.0, 1.0) == pytest.approx(20e6, rel=1e-15)
    assert ch.link_rate(20e6, 4, 1.0, 1.0, 1.0) == pytest.approx(5e6, rel=1e-15)
    with pytest.raises(ValueError):
        ch.link_rate(20e6, 0, 1.0, 1.0, 1.0)


def test_secrecy_and_time_examples():
    assert ch.secrecy_rate(40e6, 15e6) == 25e6
    assert ch.secrecy_rate(10e6, 12e6) == 0
    assert ch.secrecy_rate(7e6, 7e6) == 0
    assert ch.secure_tx_time(8e6, 8e6) == 1.0
    assert ch.secure_tx_time(0, 123.0) == 0
    with pytest.raises(InfeasibleSecrecy):
        ch.secure_tx_time(8e6, 0.0)
    assert ch.tx_energy(0.1995, 1) == pytest.approx(0.1995)
    assert ch.tx_energy(0.5, 0) == 0
    assert ch.tx_energy(0.0316, 2) == pytest.approx(0.0632)


def test_validation_names_field():
    with pytest.raises(ValidationError) as err:
        ch.ChannelParams(bandwidth=-1).validate()
    assert err.value.field == "bandwidth"
    with pytest.raises(ValidationError) as err:
        ch.ChannelParams(eta_los=2.0, eta_nlos=1.0).validate()
    assert err.value.field == "eta_nlos"


@given(st.floats(0, 89.9), st.floats(0.01, 0.1))
def test_los_monotone_and_bounded(theta, step):
    lo, hi = ch.los_probability(theta, P), ch.los_probability(theta + step, P)
    assert 0 < lo < hi < 1


@given(st.floats(0.0, 1.0), st.floats(1.0, 200.0), st.floats(1.001, 2.0))
def test_loss_increases_with_distance(p, d, factor):
    assert ch.mean_path_loss(p, d * factor, P) > ch.mean_path_loss(p, d, P) > 0


@given(st.floats(0.0, 1.0), st.floats(1.0, 200.0))
def test_loss_increases_with_exponent(p, d):
    hi = ch.ChannelParams(path_loss_exp=3.5)
    assert ch.mean_path_loss(p, d, hi) > ch.mean_path_loss(p, d, P)


@given(st.floats(1e-3, 10), st.floats(1e-12, 1e-3), st.integers(1, 16))
def test_rate_monotone_and_share(power, gain, share):
    base = ch.link_rate(20e6, share, power, gain, 1e-13)
    assert ch.link_rate(20e6, share, power * 2, gain, 1e-13) >= base
    assert ch.link_rate(20e6, share, power, gain * 2, 1e-13) >= base
    assert ch.link_rate(20e6, 2 * share, power, gain, 1e-13) * 2 == pytest.approx(base, rel=1e-15)


@given(st.floats(0, 1e9), st.floats(0, 1e9))
def test_secrecy_antisymmetric_sum(x, y):
    assume(x != y)
    assert ch.secrecy_rate(x, y) + ch.secrecy_rate(y, x) == pytest.approx(abs(x - y), rel=1e-15)


def _prm(p, power):
    return {"a": p.a, "b": p.b, "eta1": p.eta_los, "eta2": p.eta_nlos, "fc": p.carrier_freq,
            "iota": p.path_loss_exp, "bw": p.bandwidth, "n0": p.noise_power, "p": power}


def test_links_match_reference(rng):
    for _ in range(200):
        dev = (rng.uniform(0, 100), rng.uniform(0, 100), 0.0)
        uav, eve = (tuple(rng.uniform(1, 100, 3)) for _ in range(2))
        share = int(rng.integers(1, 8))
        got = ch.n2m_link(dev, uav, eve, share, P)
        want = ref.ground_link(dev, uav, eve, share, _prm(P, P.p_device))
        for g, w in zip((got.legit_rate, got.eve_rate, got.secrecy_rate), want):
            assert g == w or rel(g, w) <= 1e-12
        got = ch.m2q_link(uav, dev[:2] + (50.0,), eve, share, P)
        want = ref.air_link(uav, dev[:2] + (50.0,), eve, share, _prm(P, P.p_uav))
        for g, w in zip((got.legit_rate, got.eve_rate, got.secrecy_rate), want):
            assert g == w or rel(g, w) <= 1e-12


def test_m2q_weighting_flag():
    weighted = ch.ChannelParams(m2q_los_weighted=True)
    src, dst = (10.0, 10.0, 80.0), (60.0, 40.0, 30.0)
    plos = ch.los_probability(ch.elevation_angle(src, dst), weighted)
    assert ch.air_to_air_gain(src, dst, weighted) == pytest.approx(ch.air_to_air_gain(src, dst, P) / plos,
                                                                   rel=1e-12)
