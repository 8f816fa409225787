"""Structural analysis: stage censuses, isolation scans, selectivity oracles,
and closed-form bound calculators.

The enumeration oracles are exhaustive by design and guarded by explicit
budgets — they raise BudgetExceededError rather than silently sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Optional, Sequence

import numpy as np

from wakesim import kernels
from wakesim.model import ActivationPattern
from wakesim.schedules import SectionSchedule, TransmissionArray

DEFAULT_BUDGET = 2_000_000


class BudgetExceededError(RuntimeError):
    """An exhaustive enumeration would exceed its stated budget."""


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


@dataclass(frozen=True)
class StageCensus:
    """How many active stations sit in each stage at one global time.

    counts maps stage -> station count; stations whose local position has
    run past the schedule are tallied in `exhausted`, not in any stage.
    """

    time: int
    counts: dict[int, int]
    total_active: int
    exhausted: int


def stage_census(
    pattern: ActivationPattern, schedule: SectionSchedule, time: int
) -> StageCensus:
    """Census of active stations by stage at global `time`."""
    if time < 0:
        raise ValueError(f"time must be >= 0, got {time}")
    counts: dict[int, int] = {}
    total = 0
    exhausted = 0
    for u, sigma in pattern.activations.items():
        if sigma > time:
            continue
        total += 1
        pos = time - sigma
        if pos >= schedule.length:
            exhausted += 1
        else:
            stage = schedule.stage_of_position(pos)
            counts[stage] = counts.get(stage, 0) + 1
    return StageCensus(time=time, counts=counts, total_active=total, exhausted=exhausted)


def psi(census: StageCensus, k_cap: int) -> float:
    """Potential sum_{i=1}^{ceil(log2 k_cap)} |W_i| / 2^i."""
    if k_cap < 1:
        raise ValueError(f"k_cap must be >= 1, got {k_cap}")
    return sum(census.counts.get(i, 0) / 2.0**i for i in range(1, _ceil_log2(k_cap) + 1))


@dataclass(frozen=True)
class IntervalClass:
    """Verdict of classify_interval on [t1, t2] for a target stage omega."""

    t1: int
    t2: int
    omega: int
    balanced: bool
    light: bool
    psi_min: float
    psi_max: float


def classify_interval(
    pattern: ActivationPattern,
    schedule: SectionSchedule,
    t1: int,
    t2: int,
    omega: int,
    k_cap: int,
    psi_cap: str = "omega",
) -> IntervalClass:
    """Classify [t1, t2] as balanced and/or light for stage omega.

    Balanced: the interval has exactly phi(omega-1) steps, every step has
    2^omega <= |W_omega| <= 2^(omega+2) active stations in stage omega, and
    none above it.  Light additionally bounds the union over stages <= omega
    by 2^(omega+4) and requires at least phi(omega-2) steps with
    1 <= psi <= cap, where cap is 128*omega (psi_cap="omega") or
    128*lg n (psi_cap="logn").
    """
    if t1 > t2 or t1 < 0:
        raise ValueError(f"need 0 <= t1 <= t2, got [{t1}, {t2}]")
    if not 1 <= omega <= _ceil_log2(k_cap):
        raise ValueError(f"omega {omega} out of range 1..{_ceil_log2(k_cap)}")
    if psi_cap == "omega":
        cap = 128.0 * omega
    elif psi_cap == "logn":
        cap = 128.0 * math.log2(schedule.n)
    else:
        raise ValueError(f"psi_cap must be 'omega' or 'logn', got {psi_cap!r}")

    censuses = [stage_census(pattern, schedule, t) for t in range(t1, t2 + 1)]
    psis = [psi(c, k_cap) for c in censuses]
    size_ok = (t2 - t1 + 1) == schedule.phi(omega - 1)
    balanced = size_ok and all(
        2**omega <= c.counts.get(omega, 0) <= 2 ** (omega + 2)
        and not any(i > omega for i in c.counts)
        for c in censuses
    )
    light = False
    if balanced:
        union_ok = all(
            sum(cnt for i, cnt in c.counts.items() if i <= omega) <= 2 ** (omega + 4)
            for c in censuses
        )
        good_steps = sum(1 for v in psis if 1.0 <= v <= cap)
        light = union_ok and good_steps >= schedule.phi(max(omega - 2, 0))
    return IntervalClass(
        t1=t1,
        t2=t2,
        omega=omega,
        balanced=balanced,
        light=light,
        psi_min=min(psis),
        psi_max=max(psis),
    )


@dataclass(frozen=True)
class IsolatedPosition:
    """A (time, channel) pair where exactly one active station transmits."""

    time: int
    channel: int
    station: int


def scan_isolated(
    array: TransmissionArray, pattern: ActivationPattern, horizon: int
) -> list[IsolatedPosition]:
    """All isolated positions with time <= horizon, sorted by (time, channel).

    A position (t, beta) is isolated when exactly one station active at t
    has bit 1 at its local position on beta and every other active station
    has bit 0 (stations past the end of their schedule are silent).
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    for u in pattern.stations:
        if u > array.n:
            raise ValueError(f"station {u} out of range 1..{array.n}")
    order = pattern.stations
    rows = np.ascontiguousarray(array.materialize(order))
    sigmas = np.array([pattern.activations[u] for u in order], dtype=np.int64)
    ids = np.array(order, dtype=np.int64)
    out = []
    limit = min(horizon, pattern.max_sigma + array.length - 1)
    for t in range(limit + 1):
        counts, lone = kernels.array_round(rows, sigmas, ids, t)
        for ci in range(array.b):
            if counts[ci] == 1:
                out.append(IsolatedPosition(time=t, channel=ci + 1, station=int(lone[ci])))
    return out


@dataclass(frozen=True)
class SelectivityVerdict:
    selective: bool
    witness: Optional[frozenset[int]]  # a subset no family member isolates


def check_selective(
    family: Sequence[Iterable[int]],
    n: int,
    k: int,
    mode: str = "exactly",
    budget: int = DEFAULT_BUDGET,
) -> SelectivityVerdict:
    """Exhaustively decide (n, k)-selectivity of a set family over 1..n.

    mode="exactly" tests all size-k subsets, mode="up-to" all sizes 1..k.
    A family is selective when every tested subset A has |A & B| = 1 for
    some member B.  The witness (when not selective) is the first failing
    subset in (size, lexicographic) order, hence deterministic.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if mode not in ("exactly", "up-to"):
        raise ValueError(f"mode must be 'exactly' or 'up-to', got {mode!r}")
    sizes = [k] if mode == "exactly" else list(range(1, k + 1))
    total = sum(math.comb(n, s) for s in sizes)
    if total > budget:
        raise BudgetExceededError(f"{total} subsets exceed budget {budget}")
    fam_masks = []
    for members in family:
        mask = 0
        for u in members:
            if not 1 <= u <= n:
                raise ValueError(f"family member station {u} out of range 1..{n}")
            mask |= 1 << (u - 1)
        fam_masks.append(mask)
    for s in sizes:
        for subset in combinations(range(1, n + 1), s):
            mask = 0
            for u in subset:
                mask |= 1 << (u - 1)
            if not any((mask & fm).bit_count() == 1 for fm in fam_masks):
                return SelectivityVerdict(selective=False, witness=frozenset(subset))
    return SelectivityVerdict(selective=True, witness=None)


@dataclass(frozen=True)
class QuerySequence:
    """A deterministic transmission plan: per step, who transmits where.

    queries[i] is the set of (station, channel) pairs transmitting in step
    i+1; stations lie in 1..n, channels in 1..b.
    """

    n: int
    b: int
    queries: tuple[frozenset[tuple[int, int]], ...]

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(frozenset(q) for q in self.queries))
        for i, q in enumerate(self.queries):
            for u, beta in q:
                if not 1 <= u <= self.n or not 1 <= beta <= self.b:
                    raise ValueError(f"query {i} entry ({u}, {beta}) out of range")

    @classmethod
    def from_array(cls, array: TransmissionArray, t_limit: int) -> "QuerySequence":
        """Queries induced by the array prefix under simultaneous activation."""
        if not 0 <= t_limit <= array.length:
            raise ValueError(f"t_limit {t_limit} outside [0, {array.length}]")
        bits = array.materialize()
        queries = []
        for j in range(t_limit):
            queries.append(
                frozenset(
                    (u, beta)
                    for u in range(1, array.n + 1)
                    for beta in range(1, array.b + 1)
                    if bits[u - 1, beta - 1, j]
                )
            )
        return cls(n=array.n, b=array.b, queries=tuple(queries))

    def channel_family(self, channel: int) -> list[frozenset[int]]:
        """Per-step station sets on one channel (a set family over 1..n)."""
        if not 1 <= channel <= self.b:
            raise ValueError(f"channel {channel} out of range 1..{self.b}")
        return [frozenset(u for u, beta in q if beta == channel) for q in self.queries]


def find_blocking_activation(
    queries: QuerySequence,
    k: int,
    t_limit: int,
    budget: int = DEFAULT_BUDGET,
) -> Optional[frozenset[int]]:
    """Search for a size-k activation set no prefix query isolates.

    Returns the lexicographically first X with |X & Q_{i,beta}| != 1 for
    every step i <= t_limit and channel beta, or None when every X is
    isolated somewhere.  Steps beyond the end of `queries` impose no
    constraint; t_limit = 0 makes any X vacuously blocking.
    """
    if not 1 <= k <= queries.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={queries.n}")
    if t_limit < 0:
        raise ValueError(f"t_limit must be >= 0, got {t_limit}")
    total = math.comb(queries.n, k)
    if total > budget:
        raise BudgetExceededError(f"{total} subsets exceed budget {budget}")
    step_masks: list[list[int]] = []
    for q in queries.queries[:t_limit]:
        masks = [0] * queries.b
        for u, beta in q:
            masks[beta - 1] |= 1 << (u - 1)
        step_masks.append(masks)
    for subset in combinations(range(1, queries.n + 1), k):
        x = 0
        for u in subset:
            x |= 1 << (u - 1)
        if all(
            (x & qm).bit_count() != 1 for masks in step_masks for qm in masks
        ):
            return frozenset(subset)
    return None


def deterministic_lower_bound(n: int, k: int, b: int) -> float:
    """Rounds any deterministic wake-up protocol needs in the worst case:
    (k / 4b) * lg(n/k) - (k+1)/b.  May be vacuous (<= 0) for small n/k.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    return (k / (4.0 * b)) * math.log2(n / k) - (k + 1.0) / b


@dataclass(frozen=True)
class UpperBounds:
    """Shape values (unit constants) of the deterministic upper bounds.

    many_channels is None unless b > log2(128 * b * lg n); the _jam variants
    are None unless 0 < p < 1.
    """

    general: float
    many_channels: Optional[float]
    general_jam: Optional[float]
    many_channels_jam: Optional[float]

    def as_dict(self) -> dict[str, Optional[float]]:
        return {
            "general": self.general,
            "many_channels": self.many_channels,
            "general_jam": self.general_jam,
            "many_channels_jam": self.many_channels_jam,
        }


def deterministic_upper_bounds(n: int, k: int, b: int, p: float = 0.0) -> UpperBounds:
    """Growth shapes of the deterministic constructions.

    general: k * lg n * (lg k)^(1/b); many_channels: (k/b) * lg n *
    log2(b * lg n), reported only in the many-channel regime; jam variants
    scale by 1 / log2(1/p).
    """
    if not 1 <= k <= n or n < 2:
        raise ValueError(f"need 1 <= k <= n and n >= 2, got k={k}, n={n}")
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must be in [0, 1), got {p}")
    lgn = math.log2(n)
    lgk = math.log2(k)
    general = k * lgn * lgk ** (1.0 / b)
    many = None
    if b > math.log2(128 * b * lgn):
        many = (k / b) * lgn * math.log2(b * lgn)
    general_jam = None
    many_jam = None
    if p > 0.0:
        factor = 1.0 / math.log2(1.0 / p)
        general_jam = general * factor
        many_jam = many * factor if many is not None else None
    return UpperBounds(
        general=general,
        many_channels=many,
        general_jam=general_jam,
        many_channels_jam=many_jam,
    )


@dataclass(frozen=True)
class VerifyResult:
    """Outcome of verify_waking_small: a universal wake-up check."""

    ok: bool
    counterexample: Optional[ActivationPattern]
    patterns_checked: int


def verify_waking_small(
    array: TransmissionArray,
    k: int,
    horizon: int,
    family: str = "simultaneous",
    window: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> VerifyResult:
    """Exhaustively check that every small activation pattern wakes in time.

    family="simultaneous" enumerates every nonempty station subset of size
    <= k, all activated at 0; family="staggered" additionally enumerates
    activation offsets in [0, window] (anchored at min 0).  A pattern passes
    when some isolated position exists at time <= horizon.  Returns the
    first failing pattern in enumeration order, if any.
    """
    n = array.n
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if n > 64:
        raise ValueError("verification supports at most 64 stations")
    if family == "simultaneous":
        total = sum(math.comb(n, s) for s in range(1, k + 1))
        if total > budget:
            raise BudgetExceededError(f"{total} patterns exceed budget {budget}")
        masks = array.channel_masks()
        checked = 0
        for s in range(1, k + 1):
            for subset in combinations(range(1, n + 1), s):
                checked += 1
                mask = 0
                for u in subset:
                    mask |= 1 << (u - 1)
                if kernels.first_isolated(masks, mask, horizon) < 0:
                    return VerifyResult(
                        ok=False,
                        counterexample=ActivationPattern.simultaneous(subset),
                        patterns_checked=checked,
                    )
        return VerifyResult(ok=True, counterexample=None, patterns_checked=checked)
    if family != "staggered":
        raise ValueError(f"family must be 'simultaneous' or 'staggered', got {family!r}")
    if window < 0:
        raise ValueError(f"window must be >= 0, got {window}")
    w1 = window + 1
    total = sum(
        math.comb(n, s) * (w1**s - window**s) for s in range(1, k + 1)
    )  # offset tuples anchored at min 0
    if total > budget:
        raise BudgetExceededError(f"{total} patterns exceed budget {budget}")
    bits = array.materialize()
    length = array.length
    # per-station, per-channel position masks for O(1) bit probes
    rowmask = [
        [int.from_bytes(np.packbits(bits[ui, ci], bitorder="little").tobytes(), "little")
         for ci in range(array.b)]
        for ui in range(n)
    ]
    checked = 0
    for s in range(1, k + 1):
        for subset in combinations(range(1, n + 1), s):
            for offsets in product(range(w1), repeat=s):
                if min(offsets) != 0:
                    continue
                checked += 1
                woke = False
                for t in range(horizon + 1):
                    for ci in range(array.b):
                        cnt = 0
                        for u, sg in zip(subset, offsets):
                            r = t - sg
                            if 0 <= r < length and rowmask[u - 1][ci] >> r & 1:
                                cnt += 1
                                if cnt > 1:
                                    break
                        if cnt == 1:
                            woke = True
                            break
                    if woke:
                        break
                if not woke:
                    return VerifyResult(
                        ok=False,
                        counterexample=ActivationPattern(dict(zip(subset, offsets))),
                        patterns_checked=checked,
                    )
    return VerifyResult(ok=True, counterexample=None, patterns_checked=checked)
