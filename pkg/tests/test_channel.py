from __future__ import annotations

import math

import numpy as np
import pytest

from rsuloc.channel import (
    ChannelDiagnostics,
    ChannelParams,
    export_log,
    heard_rsus,
    noiseless_rss,
    rss_sample,
    simulate_epoch,
    to_model_convention,
)
from rsuloc.dataproc import read_log
from rsuloc.errors import ConfigurationError
from rsuloc.scenario import RoadConfig, deploy_rsus


def test_reference_distance_gives_p0(rng):
    p = ChannelParams(sigma=0.0)
    assert rss_sample(p, (0, 0), (1, 0), rng) == -30.0


def test_ten_d0_adds_twenty_db(rng):
    p = ChannelParams(gamma=2.0, sigma=0.0)
    assert rss_sample(p, (0, 0), (10, 0), rng) == pytest.approx(-10.0, abs=1e-12)


def test_negated_convention_round_trips():
    p = ChannelParams(gamma=3.0, sigma=0.0, negate_path_loss=True)
    phys = noiseless_rss(p, 50.0)
    assert phys < p.p0
    model = to_model_convention(phys, p.p0, True)
    assert model == pytest.approx(noiseless_rss(ChannelParams(gamma=3.0), 50.0))


def test_sample_mean_and_spread(rng):
    p = ChannelParams(gamma=3.0, sigma=2.0)
    draws = np.array([rss_sample(p, (0, 0), (30, 0), rng) for _ in range(100_000)])
    mean = noiseless_rss(p, 30.0)
    assert abs(draws.mean() - mean) < 0.05
    assert abs(draws.std() - 2.0) < 0.05


def test_clamp_counts_near_field(rng):
    diag = ChannelDiagnostics()
    p = ChannelParams(sigma=0.0)
    assert rss_sample(p, (0, 0), (0.2, 0), rng, diagnostics=diag) == p.p0
    assert diag.clamped == 1


@pytest.mark.parametrize(
    "kwargs",
    [{"gamma": 1.5}, {"gamma": 7.0}, {"sigma": -1.0}, {"packet_loss_prob": 1.5}, {"max_rsus": 0}, {"d0": 0.0}],
)
def test_invalid_params(kwargs):
    with pytest.raises(ConfigurationError):
        ChannelParams(**kwargs)


def test_full_loss_gives_nothing(rng):
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    p = ChannelParams(packet_loss_prob=1.0)
    assert simulate_epoch(rsus, (100.0, 1.75), 0.0, p, rng) == []


def test_no_loss_unlimited_hears_all(rng):
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    p = ChannelParams(max_rsus=None, comm_range=math.inf)
    out = simulate_epoch(rsus, (100.0, 1.75), 0.0, p, rng)
    assert sorted(m.rsu_id for m in out) == [r.id for r in rsus]


def test_mid_block_hears_three_nearest():
    rsus = deploy_rsus(RoadConfig(segment_length=300.0, staggered=False))
    p = ChannelParams(comm_range=60.0, max_rsus=3)
    heard = heard_rsus(rsus, (30.0, 1.75), p)
    assert len(heard) == 3
    d_heard = max(np.linalg.norm(r.position - (30.0, 1.75)) for r in heard)
    d_other = min(np.linalg.norm(r.position - (30.0, 1.75)) for r in rsus if r not in heard)
    assert d_heard <= d_other


def test_comm_range_limits(rng):
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    p = ChannelParams(comm_range=40.0, max_rsus=None)
    for m in simulate_epoch(rsus, (100.0, 1.75), 0.0, p, rng):
        pos = next(r.position for r in rsus if r.id == m.rsu_id)
        assert np.linalg.norm(pos - (100.0, 1.75)) <= 40.0


def test_loss_rate(rng):
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    p = ChannelParams(packet_loss_prob=0.3, max_rsus=None)
    kept = sum(len(simulate_epoch(rsus, (150.0, 1.75), 0.0, p, rng)) for _ in range(2000))
    rate = 1 - kept / (2000 * len(rsus))
    assert abs(rate - 0.3) < 0.01


def test_draws_are_aligned_across_parameters():
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    a = np.random.default_rng(7)
    b = np.random.default_rng(7)
    simulate_epoch(rsus, (100.0, 1.75), 0.0, ChannelParams(sigma=2.0), a)
    simulate_epoch(rsus, (100.0, 1.75), 0.0, ChannelParams(sigma=6.0, packet_loss_prob=0.5), b)
    assert a.random() == b.random()


def test_delay_samples_past_position(rng):
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    p = ChannelParams(sigma=0.0, sample_delay=0.5)
    path = lambda t: np.array([100.0 + 10.0 * t, 1.75])  # noqa: E731
    out = simulate_epoch(rsus, path, 1.0, p, rng)
    for m in out:
        pos = next(r.position for r in rsus if r.id == m.rsu_id)
        assert m.timestamp == 1.0
        assert m.power == pytest.approx(noiseless_rss(p, np.linalg.norm(pos - path(0.5))))


def test_export_and_read_back(tmp_path, rng):
    rsus = deploy_rsus(RoadConfig(segment_length=300.0))
    recs = []
    for t in (0.0, 0.1, 0.2):
        recs.extend(simulate_epoch(rsus, (100.0, 1.75), t, ChannelParams(), rng))
    path = tmp_path / "log.txt"
    assert export_log(recs, path) == len(recs)
    back = read_log(path)
    assert [(m.rsu_id, m.mac) for m in back] == [(m.rsu_id, m.mac) for m in recs]
    assert np.allclose([m.timestamp for m in back], [m.timestamp for m in recs], atol=1e-6)
    assert np.allclose([m.power for m in back], [m.power for m in recs], atol=1e-6)
