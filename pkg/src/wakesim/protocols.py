"""Wake-up protocols: randomized channel screening and deterministic arrays.

Both protocols share the round loop: active stations transmit, the jamming
adversary strikes, feedback is computed per channel, and the run ends at the
first delivered message.  All randomness is counter-based — a draw for
(station, round, channel) never depends on any other draw — which makes runs
exactly replayable and jam sets nested across jam probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from wakesim import kernels
from wakesim.model import (
    ActivationPattern,
    NetworkConfig,
    RoundOutcome,
    TransmissionDecision,
)
from wakesim.schedules import TransmissionArray


@dataclass(frozen=True)
class ScreeningConfig:
    """Parameters of the randomized screening protocol.

    k is the assumed bound on simultaneously active stations (the actual
    pattern may exceed it; the transmission probabilities stay k-based).
    epsilon only feeds the round-bound calculator.  t_max defaults to
    64 * screening_round_bound(k, b, epsilon).
    """

    k: int
    b: int
    epsilon: float = 0.05
    t_max: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.b < 1:
            raise ValueError(f"b must be >= 1, got {self.b}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")

    @property
    def effective_t_max(self) -> int:
        if self.t_max is not None:
            return self.t_max
        return 64 * screening_round_bound(self.k, self.b, self.epsilon)

    def channel_probabilities(self) -> np.ndarray:
        """Per-channel transmission probabilities k^(-beta/b), beta = 1..b."""
        return np.array(
            [self.k ** (-beta / self.b) for beta in range(1, self.b + 1)], dtype=np.float64
        )


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of one protocol run.

    wakeup_time is the 0-based global round of the first delivered message
    (None iff truncated).  trace is the per-round feedback when recorded.
    """

    wakeup_time: Optional[int]
    trace: Optional[tuple[RoundOutcome, ...]]
    rounds_executed: int
    rng_seed: int
    truncated: bool


def screening_round_bound(k: int, b: int, epsilon: float) -> int:
    """Rounds after which screening fails with probability <= epsilon.

    ceil(2e * k^(1/b) * ln(1/epsilon)).
    """
    if k < 1 or b < 1:
        raise ValueError("k and b must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return math.ceil(2.0 * math.e * k ** (1.0 / b) * math.log(1.0 / epsilon))


def _check_pattern(net: NetworkConfig, pattern: ActivationPattern) -> None:
    for u in pattern.stations:
        if u > net.n:
            raise ValueError(f"station {u} out of range 1..{net.n}")


def _run_rounds(
    net: NetworkConfig,
    seed: int,
    cap: int,
    counts_fn: Callable[[int], tuple[np.ndarray, np.ndarray]],
    record_trace: bool,
) -> SimulationResult:
    jam_key = kernels.derive(seed, kernels.DOMAIN_JAM)
    trace: Optional[list[RoundOutcome]] = [] if record_trace else None
    for t in range(cap):
        counts, lone = counts_fn(t)
        jmask = kernels.jam_mask(jam_key, t, net.b, net.jam_prob)
        per_channel = tuple(
            int(lone[ci]) if counts[ci] == 1 and not jmask >> ci & 1 else None
            for ci in range(net.b)
        )
        if trace is not None:
            jammed = frozenset(ci + 1 for ci in range(net.b) if jmask >> ci & 1)
            trace.append(RoundOutcome(time=t, per_channel=per_channel, jammed=jammed))
        if any(fb is not None for fb in per_channel):
            return SimulationResult(
                wakeup_time=t,
                trace=tuple(trace) if trace is not None else None,
                rounds_executed=t + 1,
                rng_seed=seed,
                truncated=False,
            )
    return SimulationResult(
        wakeup_time=None,
        trace=tuple(trace) if trace is not None else None,
        rounds_executed=cap,
        rng_seed=seed,
        truncated=True,
    )


def _screening_keys(seed: int, stations) -> np.ndarray:
    return np.array(
        [kernels.derive(seed, kernels.DOMAIN_PROTOCOL, u) for u in stations], dtype=np.uint64
    )


def run_channel_screening(
    net: NetworkConfig,
    pattern: ActivationPattern,
    config: ScreeningConfig,
    seed: int,
    record_trace: bool = True,
) -> SimulationResult:
    """Run the screening protocol until the first heard message or t_max.

    Each active station transmits on each channel beta with probability
    k^(-beta/b), independently across rounds and channels, from a per-station
    stream keyed by (seed, station).
    """
    _check_pattern(net, pattern)
    if config.b != net.b:
        raise ValueError(f"config.b={config.b} does not match net.b={net.b}")
    probs = config.channel_probabilities()
    order = sorted(pattern.stations, key=lambda u: (pattern.activations[u], u))
    sigmas = [pattern.activations[u] for u in order]
    ids = np.array(order, dtype=np.int64)
    keys = _screening_keys(seed, order)

    def counts_fn(t: int):
        m = 0
        while m < len(sigmas) and sigmas[m] <= t:
            m += 1
        return kernels.screening_round(keys[:m], ids[:m], t, probs)

    return _run_rounds(net, seed, config.effective_t_max, counts_fn, record_trace)


def screening_decisions(
    config: ScreeningConfig, seed: int, active_stations, t: int
) -> list[TransmissionDecision]:
    """Re-derive the exact transmission decisions of one screening round."""
    probs = config.channel_probabilities()
    out = []
    for u in active_stations:
        key = kernels.derive(seed, kernels.DOMAIN_PROTOCOL, u)
        for beta in range(1, config.b + 1):
            if kernels.u01(kernels.derive(key, t, beta)) < probs[beta - 1]:
                out.append(TransmissionDecision(u, beta))
    return out


def round_success_frequency(
    k: int, b: int, active_count: int, rounds: int, seed: int
) -> np.ndarray:
    """Empirical per-channel probability of a heard message in one round.

    Simulates `rounds` independent screening rounds with a fixed set of
    `active_count` active stations (no termination, no jamming) and returns
    the per-channel frequency of exactly-one-transmitter events.
    """
    config = ScreeningConfig(k=k, b=b)
    probs = config.channel_probabilities()
    ids = np.arange(1, active_count + 1, dtype=np.int64)
    keys = _screening_keys(seed, range(1, active_count + 1))
    hits = np.zeros(b, dtype=np.int64)
    for t in range(rounds):
        counts, _ = kernels.screening_round(keys, ids, t, probs)
        hits += counts == 1
    return hits / rounds


def run_wakeup_array(
    net: NetworkConfig,
    pattern: ActivationPattern,
    array: TransmissionArray,
    seed: int,
    t_max: Optional[int] = None,
    record_trace: bool = True,
) -> SimulationResult:
    """Run the deterministic array protocol under the given activation pattern.

    Station u transmits on channel beta at global time t iff its local
    position r = t - sigma_u satisfies 0 <= r < length and T(u, beta, r) = 1;
    exhausted stations stay silent.  Without t_max the run stops when every
    station has exhausted its schedule (truncated), or earlier on wake-up.
    The seed only drives jamming: at jam_prob = 0 the run is deterministic.
    """
    _check_pattern(net, pattern)
    if array.n != net.n or array.b != net.b:
        raise ValueError(
            f"array dimensions (n={array.n}, b={array.b}) do not match "
            f"network (n={net.n}, b={net.b})"
        )
    if t_max is not None and t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    order = pattern.stations
    rows = np.ascontiguousarray(array.materialize(order))
    sigmas = np.array([pattern.activations[u] for u in order], dtype=np.int64)
    ids = np.array(order, dtype=np.int64)
    exhaustion = pattern.max_sigma + array.length
    cap = exhaustion if t_max is None else min(t_max, exhaustion)

    def counts_fn(t: int):
        return kernels.array_round(rows, sigmas, ids, t)

    return _run_rounds(net, seed, cap, counts_fn, record_trace)


def array_decisions(
    array: TransmissionArray, pattern: ActivationPattern, t: int
) -> list[TransmissionDecision]:
    """Transmission decisions of the array protocol at global time t."""
    out = []
    for u in pattern.stations:
        r = t - pattern.activations[u]
        if 0 <= r < array.length:
            for beta in range(1, array.b + 1):
                if array.bit(u, beta, r):
                    out.append(TransmissionDecision(u, beta))
    return out
