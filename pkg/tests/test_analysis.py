"""Census/potential analysis, exhaustive oracles, and bound calculators."""

import random

import numpy as np
import pytest

from tests.conftest import array_from_rows, general_schedule
from wakesim.analysis import (
    BudgetExceededError,
    IsolatedPosition,
    QuerySequence,
    check_selective,
    classify_interval,
    deterministic_lower_bound,
    deterministic_upper_bounds,
    find_blocking_activation,
    psi,
    scan_isolated,
    stage_census,
    verify_waking_small,
)
from wakesim.model import ActivationPattern, NetworkConfig
from wakesim.protocols import run_wakeup_array
from wakesim.schedules import TransmissionArray, sample_array


@pytest.fixture(scope="module")
def sched16():
    return general_schedule(16, 1)


def round_robin_array(n=4):
    """Station u transmits exactly once, alone, at position u - 1."""
    sched = general_schedule(n, 1, c=2 if n > 4 else 1)
    rows = {u: {1: "0" * (u - 1) + "1" + "0" * (n - u)} for u in range(1, n + 1)}
    return array_from_rows(sched, rows)


class TestStageCensus:
    def test_simultaneous_group_moves_through_stages(self, sched16):
        pattern = ActivationPattern.simultaneous([1, 2, 3])
        assert stage_census(pattern, sched16, 0).counts == {1: 3}
        assert stage_census(pattern, sched16, 31).counts == {1: 3}
        assert stage_census(pattern, sched16, 32).counts == {2: 3}

    def test_mixed_offsets(self, sched16):
        pattern = ActivationPattern({1: 0, 2: 3, 3: 100})
        census = stage_census(pattern, sched16, 5)
        assert census.counts == {1: 2}
        assert census.total_active == 2
        assert census.exhausted == 0

    def test_exhausted_not_counted_in_stages(self, sched16):
        pattern = ActivationPattern({1: 0, 2: 3, 3: 100})
        census = stage_census(pattern, sched16, 640)
        assert census.exhausted == 1  # station 1 ran past position 639
        assert census.counts == {4: 2}
        assert census.total_active == 3

    def test_negative_time_rejected(self, sched16):
        with pytest.raises(ValueError):
            stage_census(ActivationPattern({1: 0}), sched16, -1)


class TestPsi:
    def _census(self, counts):
        from wakesim.analysis import StageCensus

        return StageCensus(time=0, counts=counts, total_active=sum(counts.values()), exhausted=0)

    def test_weighted_sum(self):
        assert psi(self._census({1: 2}), k_cap=2) == 1.0
        assert psi(self._census({1: 1, 2: 4}), k_cap=4) == 1.5

    def test_cap_limits_the_stage_range(self):
        assert psi(self._census({5: 7}), k_cap=4) == 0.0
        assert psi(self._census({1: 3}), k_cap=1) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            psi(self._census({}), k_cap=0)


class TestClassifyInterval:
    def test_balanced_and_light(self, sched16):
        pattern = ActivationPattern.simultaneous([1, 2, 3, 4])
        # stage 2 spans [32, 96); phi(1) = 8 steps starting at 32
        verdict = classify_interval(pattern, sched16, 32, 39, omega=2, k_cap=4)
        assert verdict.balanced and verdict.light
        assert verdict.psi_min == verdict.psi_max == 1.0

    def test_wrong_interval_size(self, sched16):
        pattern = ActivationPattern.simultaneous([1, 2, 3, 4])
        assert not classify_interval(pattern, sched16, 32, 38, omega=2, k_cap=4).balanced

    def test_too_few_stations_in_stage(self, sched16):
        pattern = ActivationPattern.simultaneous([1, 2, 3])  # 3 < 2^2
        assert not classify_interval(pattern, sched16, 32, 39, omega=2, k_cap=4).balanced

    def test_station_above_target_stage(self, sched16):
        # Four stations sit in stage 2 during [96, 103], but the anchor
        # station is already in stage 3, which voids balance.
        pattern = ActivationPattern({1: 64, 2: 64, 3: 64, 4: 64, 5: 0})
        verdict = classify_interval(pattern, sched16, 96, 103, omega=2, k_cap=4)
        assert not verdict.balanced

    def test_large_union_voids_lightness(self, sched16):
        sigmas = {u: 0 for u in range(1, 5)}
        sigmas.update({u: 32 for u in range(5, 66)})  # 61 extra in stage 1
        verdict = classify_interval(
            ActivationPattern(sigmas), sched16, 32, 39, omega=2, k_cap=4
        )
        assert verdict.balanced and not verdict.light

    def test_psi_cap_flag(self, sched16):
        pattern = ActivationPattern.simultaneous([1, 2, 3, 4])
        a = classify_interval(pattern, sched16, 32, 39, omega=2, k_cap=4, psi_cap="omega")
        b = classify_interval(pattern, sched16, 32, 39, omega=2, k_cap=4, psi_cap="logn")
        assert a.balanced == b.balanced and a.light == b.light
        with pytest.raises(ValueError):
            classify_interval(pattern, sched16, 32, 39, omega=2, k_cap=4, psi_cap="loglog")

    def test_validation(self, sched16):
        pattern = ActivationPattern.simultaneous([1, 2, 3, 4])
        with pytest.raises(ValueError):
            classify_interval(pattern, sched16, 39, 32, omega=2, k_cap=4)
        with pytest.raises(ValueError):
            classify_interval(pattern, sched16, 32, 39, omega=0, k_cap=4)
        with pytest.raises(ValueError):
            classify_interval(pattern, sched16, 32, 39, omega=3, k_cap=4)


class TestScanIsolated:
    def test_empty_array_has_no_isolated_positions(self):
        sched = general_schedule(3, 1)
        arr = array_from_rows(sched, {1: {1: "0000"}})
        assert scan_isolated(arr, ActivationPattern.simultaneous([1, 2, 3]), 10) == []

    def test_single_bit_is_isolated(self):
        sched = general_schedule(3, 1)
        arr = array_from_rows(sched, {2: {1: "000001"}})
        pattern = ActivationPattern.simultaneous([1, 2, 3])
        assert scan_isolated(arr, pattern, 10) == [
            IsolatedPosition(time=5, channel=1, station=2)
        ]
        # the horizon is inclusive
        assert scan_isolated(arr, pattern, 5) != []
        assert scan_isolated(arr, pattern, 4) == []

    def test_collisions_are_skipped(self):
        sched = general_schedule(3, 2)
        arr = array_from_rows(
            sched,
            {
                1: {1: "001"},
                2: {1: "001", 2: "100"},
                3: {1: "001"},
            },
        )
        pattern = ActivationPattern.simultaneous([1, 2, 3])
        assert scan_isolated(arr, pattern, 5) == [
            IsolatedPosition(time=0, channel=2, station=2)
        ]

    def test_staggered_positions_shift(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {1: {1: "10"}, 2: {1: "10"}})
        got = scan_isolated(arr, ActivationPattern({1: 0, 2: 1}), 10)
        assert got == [
            IsolatedPosition(time=0, channel=1, station=1),
            IsolatedPosition(time=1, channel=1, station=2),
        ]

    def test_results_sorted_by_time_then_channel(self):
        sched = general_schedule(2, 2)
        arr = array_from_rows(sched, {1: {2: "11"}, 2: {1: "01"}})
        got = scan_isolated(arr, ActivationPattern.simultaneous([1, 2]), 5)
        assert [(p.time, p.channel) for p in got] == [(0, 2), (1, 1), (1, 2)]

    def test_agrees_with_protocol_run(self):
        rng = random.Random(909)
        for _ in range(60):
            n = rng.randint(2, 6)
            b = rng.randint(1, 2)
            length = rng.randint(1, 10)
            sched = general_schedule(n, b, c=3)
            bits = np.array(
                [
                    [[rng.randint(0, 1) for _ in range(length)] for _ in range(b)]
                    for _ in range(n)
                ],
                dtype=np.uint8,
            )
            arr = TransmissionArray(sched, length, bits=bits)
            stations = sorted(rng.sample(range(1, n + 1), rng.randint(1, n)))
            offsets = [rng.randint(0, 3) for _ in stations]
            offsets[0] = 0
            pattern = ActivationPattern(dict(zip(stations, offsets)))
            horizon = pattern.max_sigma + length - 1
            isolated = scan_isolated(arr, pattern, horizon)
            run = run_wakeup_array(NetworkConfig(n=n, b=b), pattern, arr, seed=0)
            if isolated:
                assert run.wakeup_time == isolated[0].time
            else:
                assert run.truncated

    def test_validation(self):
        arr = round_robin_array()
        with pytest.raises(ValueError):
            scan_isolated(arr, ActivationPattern.simultaneous([1]), -1)
        with pytest.raises(ValueError):
            scan_isolated(arr, ActivationPattern.simultaneous([9]), 3)


class TestCheckSelective:
    def test_singletons_are_selective(self):
        singles = [[u] for u in range(1, 5)]
        for k in range(1, 5):
            assert check_selective(singles, 4, k).selective
            assert check_selective(singles, 4, k, mode="up-to").selective

    def test_disjoint_pairs_fail_with_first_witness(self):
        pairs = [[1, 2], [3, 4]]
        verdict = check_selective(pairs, 4, 2)
        assert not verdict.selective
        assert verdict.witness == frozenset({1, 2})

    def test_up_to_mode_includes_smaller_sizes(self):
        family = [[1, 2]]
        assert check_selective(family, 2, 1).selective
        verdict = check_selective(family, 2, 2, mode="up-to")
        assert not verdict.selective
        assert verdict.witness == frozenset({1, 2})

    def test_empty_family(self):
        verdict = check_selective([], 3, 1)
        assert not verdict.selective
        assert verdict.witness == frozenset({1})

    def test_budget_guard(self):
        with pytest.raises(BudgetExceededError):
            check_selective([[1]], 40, 20)
        # pre-check fires before enumeration, so a tight budget raises fast
        with pytest.raises(BudgetExceededError):
            check_selective([[1]], 20, 3, budget=100)

    def test_validation(self):
        with pytest.raises(ValueError):
            check_selective([[1]], 4, 0)
        with pytest.raises(ValueError):
            check_selective([[1]], 4, 5)
        with pytest.raises(ValueError):
            check_selective([[1]], 4, 2, mode="sometimes")
        with pytest.raises(ValueError):
            check_selective([[0]], 4, 2)
        with pytest.raises(ValueError):
            check_selective([[5]], 4, 2)


class TestQuerySequence:
    def test_from_array_round_robin(self):
        qs = QuerySequence.from_array(round_robin_array(), t_limit=4)
        assert qs.n == 4 and qs.b == 1
        assert [sorted(q) for q in qs.queries] == [[(u, 1)] for u in range(1, 5)]

    def test_channel_family(self):
        qs = QuerySequence(
            n=3, b=2, queries=[{(1, 1), (2, 2)}, {(3, 1), (1, 1)}]
        )
        assert qs.channel_family(1) == [frozenset({1}), frozenset({1, 3})]
        assert qs.channel_family(2) == [frozenset({2}), frozenset()]
        with pytest.raises(ValueError):
            qs.channel_family(3)

    def test_validation(self):
        with pytest.raises(ValueError):
            QuerySequence(n=2, b=1, queries=[{(3, 1)}])
        with pytest.raises(ValueError):
            QuerySequence(n=2, b=1, queries=[{(1, 2)}])
        with pytest.raises(ValueError):
            QuerySequence.from_array(round_robin_array(), t_limit=5)


class TestFindBlockingActivation:
    def all_transmit(self, n=6, steps=6):
        return QuerySequence(
            n=n, b=1, queries=[{(u, 1) for u in range(1, n + 1)}] * steps
        )

    def test_all_transmit_blocks_every_pair(self):
        witness = find_blocking_activation(self.all_transmit(), k=2, t_limit=6)
        assert witness == frozenset({1, 2})  # lexicographically first pair

    def test_round_robin_isolates_everything(self):
        qs = QuerySequence.from_array(round_robin_array(6), t_limit=6)
        for k in range(1, 4):
            assert find_blocking_activation(qs, k=k, t_limit=6) is None

    def test_zero_limit_is_vacuous(self):
        qs = QuerySequence.from_array(round_robin_array(), t_limit=4)
        assert find_blocking_activation(qs, k=2, t_limit=0) == frozenset({1, 2})

    def test_steps_beyond_sequence_are_unconstrained(self):
        qs = QuerySequence.from_array(round_robin_array(6), t_limit=6)
        assert find_blocking_activation(qs, k=2, t_limit=500) is None

    def test_budget_and_validation(self):
        qs = self.all_transmit(n=40, steps=1)
        with pytest.raises(BudgetExceededError):
            find_blocking_activation(qs, k=20, t_limit=1)
        with pytest.raises(ValueError):
            find_blocking_activation(qs, k=0, t_limit=1)
        with pytest.raises(ValueError):
            find_blocking_activation(qs, k=2, t_limit=-1)


class TestBounds:
    def test_lower_bound_values(self):
        assert deterministic_lower_bound(2**20, 16, 1) == 47.0
        assert deterministic_lower_bound(2**20, 16, 4) == 11.75

    def test_lower_bound_can_be_vacuous(self):
        assert deterministic_lower_bound(4, 4, 1) < 0

    def test_lower_bound_grows_with_n(self):
        values = [deterministic_lower_bound(n, 16, 1) for n in (2**10, 2**15, 2**20)]
        assert values == sorted(values)

    def test_upper_bound_general_shape(self):
        ub = deterministic_upper_bounds(2**10, 16, 1)
        assert ub.general == 640.0
        assert ub.many_channels is None
        assert ub.general_jam is None and ub.many_channels_jam is None

    def test_many_channel_regime(self):
        ub = deterministic_upper_bounds(16, 4, 16)
        assert ub.many_channels == pytest.approx(6.0)
        # few channels on a big network: the many-channel form is suppressed
        assert deterministic_upper_bounds(2**20, 16, 2).many_channels is None

    def test_jam_scaling(self):
        ub = deterministic_upper_bounds(2**10, 16, 1, p=0.25)
        assert ub.general_jam == pytest.approx(320.0)
        same = deterministic_upper_bounds(2**10, 16, 1, p=0.5)
        assert same.general_jam == pytest.approx(same.general)

    def test_as_dict_round_trip(self):
        d = deterministic_upper_bounds(16, 4, 16, p=0.5).as_dict()
        assert set(d) == {"general", "many_channels", "general_jam", "many_channels_jam"}
        assert all(v is None or v > 0 for v in d.values())

    def test_validation(self):
        with pytest.raises(ValueError):
            deterministic_lower_bound(4, 5, 1)
        with pytest.raises(ValueError):
            deterministic_lower_bound(4, 0, 1)
        with pytest.raises(ValueError):
            deterministic_upper_bounds(4, 2, 0)
        with pytest.raises(ValueError):
            deterministic_upper_bounds(4, 2, 1, p=1.0)


class TestVerifyWakingSmall:
    def test_round_robin_wakes_all_simultaneous_subsets(self):
        result = verify_waking_small(round_robin_array(), k=4, horizon=3)
        assert result.ok
        assert result.counterexample is None
        assert result.patterns_checked == 15

    def test_short_horizon_finds_the_slow_singleton(self):
        result = verify_waking_small(round_robin_array(), k=4, horizon=2)
        assert not result.ok
        assert result.counterexample == ActivationPattern({4: 0})
        assert result.patterns_checked == 4

    def test_identical_rows_fail_at_the_pair(self):
        sched = general_schedule(2, 1)
        arr = array_from_rows(sched, {1: {1: "11"}, 2: {1: "11"}})
        result = verify_waking_small(arr, k=2, horizon=1)
        assert not result.ok
        assert result.counterexample == ActivationPattern({1: 0, 2: 0})
        assert result.patterns_checked == 3

    def test_staggered_family_catches_offset_collisions(self):
        # Offsets (1, 0) push station 1's only transmission onto station
        # 2's, so the pair never wakes even though every simultaneous
        # subset does.
        arr = round_robin_array()
        assert verify_waking_small(arr, k=2, horizon=3).ok
        result = verify_waking_small(arr, k=2, horizon=3, family="staggered", window=1)
        assert not result.ok
        assert result.counterexample == ActivationPattern({1: 1, 2: 0})
        assert result.patterns_checked == 7

    def test_staggered_window_zero_matches_simultaneous(self):
        arr = round_robin_array()
        a = verify_waking_small(arr, k=3, horizon=3)
        b = verify_waking_small(arr, k=3, horizon=3, family="staggered", window=0)
        assert a == b

    def test_budget_and_validation(self):
        arr = round_robin_array()
        with pytest.raises(BudgetExceededError):
            verify_waking_small(arr, k=4, horizon=3, budget=10)
        with pytest.raises(BudgetExceededError):
            verify_waking_small(
                arr, k=2, horizon=3, family="staggered", window=1, budget=5
            )
        with pytest.raises(ValueError):
            verify_waking_small(arr, k=0, horizon=3)
        with pytest.raises(ValueError):
            verify_waking_small(arr, k=2, horizon=-1)
        with pytest.raises(ValueError):
            verify_waking_small(arr, k=2, horizon=3, family="adaptive")
        with pytest.raises(ValueError):
            verify_waking_small(arr, k=2, horizon=3, family="staggered", window=-1)
        big = sample_array(general_schedule(65, 1), seed=1)
        with pytest.raises(ValueError):
            verify_waking_small(big, k=1, horizon=1)

    def test_matches_blocking_oracle(self):
        rng = random.Random(4242)
        for _ in range(40):
            n = rng.randint(2, 6)
            b = rng.randint(1, 2)
            length = rng.randint(1, 8)
            k = rng.randint(1, n)
            sched = general_schedule(n, b, c=3)
            bits = np.array(
                [
                    [[rng.randint(0, 1) for _ in range(length)] for _ in range(b)]
                    for _ in range(n)
                ],
                dtype=np.uint8,
            )
            arr = TransmissionArray(sched, length, bits=bits)
            qs = QuerySequence.from_array(arr, t_limit=length)
            blocked = any(
                find_blocking_activation(qs, k=s, t_limit=length) is not None
                for s in range(1, k + 1)
            )
            verdict = verify_waking_small(arr, k=k, horizon=length - 1)
            assert verdict.ok == (not blocked)
