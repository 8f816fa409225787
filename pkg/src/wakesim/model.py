"""Core radio-network semantics: rounds, channel feedback, jamming.

Stations are numbered 1..n and channels 1..b.  A channel delivers a message
in a round iff exactly one station transmits on it and the adversary did not
jam it; silence, collision, and jamming are all indistinguishable (there is
no collision detection).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional

from wakesim import kernels


@dataclass(frozen=True)
class NetworkConfig:
    """Static parameters of a single-hop network: size, channels, jam rate."""

    n: int
    b: int
    jam_prob: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.b < 1:
            raise ValueError(f"b must be >= 1, got {self.b}")
        if not 0.0 <= self.jam_prob < 1.0:
            raise ValueError(f"jam_prob must be in [0, 1), got {self.jam_prob}")


class TransmissionDecision(NamedTuple):
    station: int
    channel: int


# Feedback on one channel: the transmitting station's id when a message was
# heard, else None (silence / collision / jam are indistinguishable).
ChannelFeedback = Optional[int]


@dataclass(frozen=True)
class RoundOutcome:
    """Per-channel feedback for one time step."""

    time: int
    per_channel: tuple[ChannelFeedback, ...]
    jammed: frozenset[int] = field(default_factory=frozenset)


@dataclass(frozen=True)
class ActivationPattern:
    """Activation times sigma_u >= 0 keyed by station; min sigma is 0.

    Global time is counted from the first activation, so every valid pattern
    is anchored at 0.
    """

    activations: Mapping[int, int]

    def __post_init__(self):
        if not self.activations:
            raise ValueError("activation pattern must be nonempty")
        object.__setattr__(self, "activations", dict(self.activations))
        for u, s in self.activations.items():
            if u < 1:
                raise ValueError(f"station ids start at 1, got {u}")
            if s < 0:
                raise ValueError(f"activation times must be >= 0, got {s} for station {u}")
        if min(self.activations.values()) != 0:
            raise ValueError("earliest activation must be at time 0")

    @classmethod
    def simultaneous(cls, stations: Iterable[int]) -> "ActivationPattern":
        return cls({u: 0 for u in stations})

    @property
    def stations(self) -> tuple[int, ...]:
        return tuple(sorted(self.activations))

    def active_at(self, t: int) -> tuple[int, ...]:
        return tuple(u for u in self.stations if self.activations[u] <= t)

    @property
    def max_sigma(self) -> int:
        return max(self.activations.values())


def evaluate_round(
    net: NetworkConfig,
    decisions: Iterable[tuple[int, int]],
    jammed: Iterable[int] = (),
    time: int = 0,
) -> RoundOutcome:
    """Resolve one round of transmissions into per-channel feedback.

    Channel beta reports the sender iff exactly one distinct station
    transmits on beta and beta is not jammed.  Duplicate (station, channel)
    decisions collapse: a station is either transmitting on a channel or not.
    """
    jammed = frozenset(jammed)
    for beta in jammed:
        if not 1 <= beta <= net.b:
            raise ValueError(f"jammed channel {beta} out of range 1..{net.b}")
    senders: list[set[int]] = [set() for _ in range(net.b)]
    for station, channel in decisions:
        if not 1 <= station <= net.n:
            raise ValueError(f"station {station} out of range 1..{net.n}")
        if not 1 <= channel <= net.b:
            raise ValueError(f"channel {channel} out of range 1..{net.b}")
        senders[channel - 1].add(station)
    per_channel = tuple(
        next(iter(s)) if len(s) == 1 and (beta not in jammed) else None
        for beta, s in enumerate(senders, start=1)
    )
    return RoundOutcome(time=time, per_channel=per_channel, jammed=jammed)


def draw_jammed_channels(net: NetworkConfig, time: int, jam_seed: int) -> frozenset[int]:
    """Channels jammed at `time`: independent Bernoulli(jam_prob) per channel.

    Pure function of (jam_seed, time, channel), so replays are exact and the
    jam set only grows as jam_prob grows (the underlying uniforms are shared).
    """
    mask = kernels.jam_mask(jam_seed, time, net.b, net.jam_prob)
    return frozenset(beta for beta in range(1, net.b + 1) if mask >> (beta - 1) & 1)


def is_wakeup(outcome: RoundOutcome) -> bool:
    """True iff some channel delivered a message this round."""
    return any(fb is not None for fb in outcome.per_channel)
