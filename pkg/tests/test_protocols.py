"""Protocol runs: screening, deterministic arrays, traces, and round bounds."""

import itertools
import math

import numpy as np
import pytest

from tests.conftest import array_from_rows, general_schedule
from wakesim import kernels
from wakesim.model import (
    ActivationPattern,
    NetworkConfig,
    draw_jammed_channels,
    evaluate_round,
)
from wakesim.protocols import (
    ScreeningConfig,
    array_decisions,
    round_success_frequency,
    run_channel_screening,
    run_wakeup_array,
    screening_decisions,
    screening_round_bound,
)
from wakesim.schedules import sample_array


class TestRoundBound:
    def test_frozen_values(self):
        assert screening_round_bound(64, 1, 0.05) == 1043
        assert screening_round_bound(64, 2, 0.05) == 131
        assert screening_round_bound(16, 4, math.exp(-1)) == 11

    def test_validation(self):
        for eps in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError):
                screening_round_bound(4, 1, eps)
        with pytest.raises(ValueError):
            screening_round_bound(0, 1, 0.5)

    def test_more_channels_need_fewer_rounds(self):
        bounds = [screening_round_bound(64, b, 0.05) for b in (1, 2, 4, 8)]
        assert bounds == sorted(bounds, reverse=True)
        assert len(set(bounds)) == len(bounds)


class TestScreeningConfig:
    def test_default_horizon_scales_the_bound(self):
        cfg = ScreeningConfig(k=64, b=2)
        assert cfg.effective_t_max == 64 * 131
        assert ScreeningConfig(k=64, b=2, t_max=7).effective_t_max == 7

    def test_channel_probabilities(self):
        cfg = ScreeningConfig(k=16, b=4)
        assert np.allclose(cfg.channel_probabilities(), [0.5, 0.25, 0.125, 0.0625])
        assert np.all(ScreeningConfig(k=1, b=3).channel_probabilities() == 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScreeningConfig(k=0, b=1)
        with pytest.raises(ValueError):
            ScreeningConfig(k=2, b=0)
        with pytest.raises(ValueError):
            ScreeningConfig(k=2, b=1, epsilon=1.0)
        with pytest.raises(ValueError):
            ScreeningConfig(k=2, b=1, t_max=0)


class TestChannelScreening:
    def test_single_station_wakes_immediately(self):
        # With k = 1 every channel probability is 1, so the lone active
        # station is heard in the very first round.
        for b in (1, 2, 4):
            net = NetworkConfig(n=5, b=b)
            result = run_channel_screening(
                net, ActivationPattern({3: 0}), ScreeningConfig(k=1, b=b), seed=42
            )
            assert result.wakeup_time == 0
            assert not result.truncated
            assert result.trace[0].per_channel == (3,) * b

    def test_deterministic_replay(self):
        net = NetworkConfig(n=8, b=2, jam_prob=0.3)
        pattern = ActivationPattern({1: 0, 2: 0, 5: 3, 8: 1})
        cfg = ScreeningConfig(k=8, b=2)
        a = run_channel_screening(net, pattern, cfg, seed=7)
        b = run_channel_screening(net, pattern, cfg, seed=7)
        assert a == b
        c = run_channel_screening(net, pattern, cfg, seed=8)
        assert a != c

    def test_truncation_at_t_max(self):
        # Jam everything often enough and the horizon is hit: with two
        # stations always colliding (k=1 => prob 1) nothing is ever heard.
        net = NetworkConfig(n=2, b=1)
        result = run_channel_screening(
            net,
            ActivationPattern({1: 0, 2: 0}),
            ScreeningConfig(k=1, b=1, t_max=20),
            seed=3,
        )
        assert result.truncated
        assert result.wakeup_time is None
        assert result.rounds_executed == 20

    def test_trace_is_replayable(self):
        net = NetworkConfig(n=10, b=3, jam_prob=0.25)
        pattern = ActivationPattern({1: 0, 4: 2, 7: 5, 10: 6})
        cfg = ScreeningConfig(k=4, b=3, t_max=60)
        result = run_channel_screening(net, pattern, cfg, seed=99)
        jam_key = kernels.derive(99, kernels.DOMAIN_JAM)
        assert result.trace is not None and len(result.trace) == result.rounds_executed
        for outcome in result.trace:
            t = outcome.time
            assert outcome.jammed == draw_jammed_channels(net, t, jam_key)
            decisions = screening_decisions(cfg, 99, pattern.active_at(t), t)
            assert evaluate_round(net, decisions, outcome.jammed, t) == outcome

    def test_stations_silent_before_activation(self):
        # Until its activation time a station contributes no transmissions:
        # the decision audit for the active prefix reproduces each round, and
        # before sigma_u = 4 the late station appears in no decision.
        net = NetworkConfig(n=2, b=1)
        pattern = ActivationPattern({1: 0, 2: 4})
        cfg = ScreeningConfig(k=2, b=1, t_max=4)
        result = run_channel_screening(net, pattern, cfg, seed=11)
        horizon = result.rounds_executed
        for t in range(horizon):
            for u, _ in screening_decisions(cfg, 11, pattern.active_at(t), t):
                assert pattern.activations[u] <= t

    def test_config_network_mismatch(self):
        with pytest.raises(ValueError):
            run_channel_screening(
                NetworkConfig(n=2, b=2),
                ActivationPattern({1: 0}),
                ScreeningConfig(k=2, b=1),
                seed=0,
            )

    def test_pattern_station_out_of_range(self):
        with pytest.raises(ValueError):
            run_channel_screening(
                NetworkConfig(n=2, b=1),
                ActivationPattern({3: 0}),
                ScreeningConfig(k=2, b=1),
                seed=0,
            )

    def test_no_trace_when_disabled(self):
        result = run_channel_screening(
            NetworkConfig(n=2, b=1),
            ActivationPattern({1: 0}),
            ScreeningConfig(k=2, b=1, t_max=50),
            seed=21,
            record_trace=False,
        )
        assert result.trace is None
        assert result.wakeup_time is not None

    def test_one_round_success_frequency(self):
        # A single screening round with w = 8 active stations on channel 1
        # at k = 64, b = 2 succeeds well above 1/(2e*8): the empirical rate
        # over 20000 rounds clears the threshold by many sigmas.
        freq = round_success_frequency(64, 2, 8, 20000, seed=1234)
        threshold = 1.0 / (2.0 * math.e * 8)
        sigma = math.sqrt(0.25 / 20000)
        assert freq[0] >= threshold - 3 * sigma
        # exact single-round probability: 8 * (1/8) * (7/8)^7
        expected = (7 / 8) ** 7
        assert abs(freq[0] - expected) < 5 * math.sqrt(expected * (1 - expected) / 20000)


class TestWakeupArray:
    def test_lone_bit_wakes_at_zero(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {1: {1: "1"}})
        net = NetworkConfig(n=2, b=1)
        result = run_wakeup_array(net, ActivationPattern({1: 0, 2: 0}), arr, seed=0)
        assert result.wakeup_time == 0
        assert result.trace[0].per_channel == (1,)

    def test_identical_rows_never_wake(self):
        # Two stations with identical rows collide or stay silent in every
        # round; exhaustively over all length-4 rows the run truncates.
        sched = general_schedule(2, 1)
        net = NetworkConfig(n=2, b=1)
        pattern = ActivationPattern({1: 0, 2: 0})
        for row_bits in itertools.product("01", repeat=4):
            row = "".join(row_bits)
            arr = array_from_rows(sched, {1: {1: row}, 2: {1: row}})
            result = run_wakeup_array(net, pattern, arr, seed=0)
            assert result.truncated
            assert result.wakeup_time is None
            assert result.rounds_executed == 4

    def test_stagger_breaks_symmetry(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {1: {1: "11"}, 2: {1: "11"}})
        net = NetworkConfig(n=2, b=1)
        simultaneous = run_wakeup_array(net, ActivationPattern({1: 0, 2: 0}), arr, seed=0)
        assert simultaneous.truncated
        staggered = run_wakeup_array(net, ActivationPattern({1: 0, 2: 1}), arr, seed=0)
        assert staggered.wakeup_time == 0
        assert staggered.trace[0].per_channel == (1,)

    def test_positions_are_relative_to_activation(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {2: {1: "0100"}})
        net = NetworkConfig(n=2, b=1)
        result = run_wakeup_array(net, ActivationPattern({1: 0, 2: 3}), arr, seed=0)
        # station 2 activates at 3, its local position 1 bit fires at t = 4
        assert result.wakeup_time == 4
        assert result.trace[4].per_channel == (2,)

    def test_exhausted_stations_stop(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {1: {1: "1"}, 2: {1: "1"}})
        net = NetworkConfig(n=2, b=1)
        result = run_wakeup_array(net, ActivationPattern({1: 0, 2: 0}), arr, seed=0)
        assert result.truncated
        assert result.rounds_executed == 1  # max sigma + length

    def test_t_max_truncates_early(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {1: {1: "00000001"}, 2: {1: "00000000"}})
        net = NetworkConfig(n=2, b=1)
        pattern = ActivationPattern({1: 0, 2: 0})
        full = run_wakeup_array(net, pattern, arr, seed=0)
        assert full.wakeup_time == 7
        cut = run_wakeup_array(net, pattern, arr, seed=0, t_max=5)
        assert cut.truncated and cut.rounds_executed == 5

    def test_dimension_mismatch(self):
        arr = sample_array(general_schedule(4, 2), seed=1)
        with pytest.raises(ValueError):
            run_wakeup_array(NetworkConfig(n=4, b=1), ActivationPattern({1: 0}), arr, seed=0)
        with pytest.raises(ValueError):
            run_wakeup_array(NetworkConfig(n=5, b=2), ActivationPattern({1: 0}), arr, seed=0)
        with pytest.raises(ValueError):
            run_wakeup_array(
                NetworkConfig(n=4, b=2), ActivationPattern({1: 0}), arr, seed=0, t_max=0
            )

    def test_trace_matches_decision_audit(self):
        sched = general_schedule(6, 2, c=2)
        arr = sample_array(sched, seed=314, length=30)
        net = NetworkConfig(n=6, b=2, jam_prob=0.4)
        pattern = ActivationPattern({1: 0, 2: 1, 3: 1, 4: 7, 6: 2})
        result = run_wakeup_array(net, pattern, arr, seed=2020)
        for outcome in result.trace:
            t = outcome.time
            decisions = array_decisions(arr, pattern, t)
            assert evaluate_round(net, decisions, outcome.jammed, t) == outcome

    def test_jamming_only_delays_wakeup(self):
        # Same seed, growing jam rate: the jam sets are nested, so the
        # first heard round can only move later (or disappear).
        sched = general_schedule(8, 2, c=2)
        arr = sample_array(sched, seed=555, length=60)
        pattern = ActivationPattern({1: 0, 2: 0, 3: 2, 4: 5})
        for seed in range(40):
            quiet = run_wakeup_array(
                NetworkConfig(n=8, b=2, jam_prob=0.0), pattern, arr, seed, record_trace=False
            )
            noisy = run_wakeup_array(
                NetworkConfig(n=8, b=2, jam_prob=0.6), pattern, arr, seed, record_trace=False
            )
            if noisy.wakeup_time is not None:
                assert quiet.wakeup_time is not None
                assert quiet.wakeup_time <= noisy.wakeup_time
