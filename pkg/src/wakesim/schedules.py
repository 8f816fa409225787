"""Section schedules and transmission arrays.

A schedule divides array positions into geometrically growing stages; an
array assigns each (station, channel, position) a transmission bit, either
explicitly or lazily from a seed.  Lazy bits are a pure function of
(seed, station, channel, position), so huge arrays cost nothing to create
and any slice can be re-derived bit-for-bit.
"""

from __future__ import annotations

import enum
import math
import struct
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from wakesim import kernels


class OutOfScheduleError(ValueError):
    """A position at or beyond the schedule/array length was requested."""


class ArrayFormatError(ValueError):
    """An array file failed validation; `offset` is the failing byte offset."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"bad array file at byte offset {offset}: {message}")
        self.offset = offset


class ScheduleKind(enum.Enum):
    GENERAL = "general"
    MODIFIED = "modified"


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True)
class SectionSchedule:
    """Stage geometry for transmission arrays.

    Stage boundaries follow gamma_i = phi(i+1) with gamma_0 = 0: stage i
    covers positions [gamma_{i-1}, gamma_i), so the prefix [0, phi(1)) is
    part of stage 1.  The general kind uses
        phi(i) = ceil(c * 2^i * i^(1/b) * lg n),
    the modified (many-channel) kind uses
        phi(i) = ceil(c * (2^i / b) * lg n * log2(128 * b * lg n))
    and requires b > log2(128 * b * lg n).
    """

    kind: ScheduleKind
    n: int
    b: int
    c: Fraction = Fraction(1)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.b < 1:
            raise ValueError(f"b must be >= 1, got {self.b}")
        object.__setattr__(self, "c", Fraction(self.c))
        if self.c < 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.kind is ScheduleKind.MODIFIED:
            if self.b <= math.log2(128 * self.b * math.log2(self.n)):
                raise ValueError(
                    "modified schedules need b > log2(128 * b * lg n); "
                    f"got b={self.b}, n={self.n}"
                )
        phis = tuple(self._phi_raw(i) for i in range(self.max_stage + 2))
        for i in range(1, self.max_stage + 1):
            if phis[i + 1] <= phis[i]:
                raise ValueError(f"phi must be strictly increasing, broken at i={i}")
        if phis[1] < 1:
            raise ValueError("phi(1) must be positive")
        object.__setattr__(self, "_phis", phis)
        object.__setattr__(
            self, "_gammas", (0,) + tuple(phis[i + 1] for i in range(1, self.max_stage + 1))
        )

    def _phi_raw(self, i: int) -> int:
        if i == 0:
            return 0
        c = float(self.c)
        lgn = math.log2(self.n)
        if self.kind is ScheduleKind.GENERAL:
            return math.ceil(c * 2.0**i * i ** (1.0 / self.b) * lgn)
        return math.ceil(c * (2.0**i / self.b) * lgn * math.log2(128 * self.b * lgn))

    @property
    def max_stage(self) -> int:
        return _ceil_log2(self.n)

    def phi(self, i: int) -> int:
        if not 0 <= i <= self.max_stage + 1:
            raise ValueError(f"phi index {i} out of range 0..{self.max_stage + 1}")
        return self._phis[i]

    def gamma(self, i: int) -> int:
        """End of stage i (exclusive); gamma_0 = 0."""
        if not 0 <= i <= self.max_stage:
            raise ValueError(f"gamma index {i} out of range 0..{self.max_stage}")
        return 0 if i == 0 else self._phis[i + 1]

    @property
    def gammas(self) -> tuple[int, ...]:
        """(gamma_0, ..., gamma_max_stage); stage i covers [gammas[i-1], gammas[i])."""
        return self._gammas

    @property
    def length(self) -> int:
        """Total schedule length gamma_{max_stage} = phi(max_stage + 1)."""
        return self._phis[self.max_stage + 1]

    def stage_of_position(self, j: int) -> int:
        if not 0 <= j < self.length:
            raise OutOfScheduleError(f"position {j} outside [0, {self.length})")
        return bisect_right(self.gammas, j)

    @property
    def modulus(self) -> int:
        """Channel-folding modulus of the modified kind."""
        if self.kind is not ScheduleKind.MODIFIED:
            raise ValueError("modulus is defined for modified schedules only")
        return math.ceil(math.log2(128 * self.b * math.log2(self.n)))

    def bit_probability(self, stage: int, channel: int) -> float:
        if self.kind is ScheduleKind.GENERAL:
            return regular_bit_probability(self, stage, channel)
        return modified_bit_probability(self, stage, channel)

    @property
    def clamped_cells(self) -> tuple[tuple[int, int], ...]:
        """(stage, channel) cells whose raw probability exceeded 1 and was clamped."""
        if self.kind is not ScheduleKind.MODIFIED:
            return ()
        out = []
        for stage in range(1, self.max_stage + 1):
            for channel in range(1, self.b + 1):
                if self.b * 2.0 ** -(stage + channel % self.modulus) > 1.0:
                    out.append((stage, channel))
        return tuple(out)

    def prob_table(self) -> np.ndarray:
        """Bernoulli table, shape (max_stage, b), row i-1 = stage i."""
        return np.array(
            [
                [self.bit_probability(stage, channel) for channel in range(1, self.b + 1)]
                for stage in range(1, self.max_stage + 1)
            ],
            dtype=np.float64,
        )


def phi(schedule: SectionSchedule, i: int) -> int:
    return schedule.phi(i)


def stage_of_position(schedule: SectionSchedule, j: int) -> int:
    return schedule.stage_of_position(j)


def regular_bit_probability(schedule: SectionSchedule, stage: int, channel: int) -> float:
    """Stage-i transmission probability 2^-i * i^(-channel/b) of the general kind."""
    if schedule.kind is not ScheduleKind.GENERAL:
        raise ValueError("schedule kind is not general")
    if not 1 <= stage <= schedule.max_stage:
        raise ValueError(f"stage {stage} out of range 1..{schedule.max_stage}")
    if not 1 <= channel <= schedule.b:
        raise ValueError(f"channel {channel} out of range 1..{schedule.b}")
    return 2.0**-stage * stage ** (-channel / schedule.b)


def modified_bit_probability(schedule: SectionSchedule, stage: int, channel: int) -> float:
    """Probability b * 2^-(i + channel mod m) of the modified kind, clamped to 1.

    The formula can exceed 1 for small stages; those cells are clamped and
    reported by SectionSchedule.clamped_cells.  No upper stage cap: the
    geometric decay is well-defined past the schedule's own stages.
    """
    if schedule.kind is not ScheduleKind.MODIFIED:
        raise ValueError("schedule kind is not modified")
    if stage < 1:
        raise ValueError(f"stage must be >= 1, got {stage}")
    if not 1 <= channel <= schedule.b:
        raise ValueError(f"channel {channel} out of range 1..{schedule.b}")
    return min(1.0, schedule.b * 2.0 ** -(stage + channel % schedule.modulus))


@dataclass(frozen=True)
class TransmissionArray:
    """Bit assignment T(u, beta, j) over stations x channels x positions.

    Exactly one of `seed` (lazy) and `bits` (explicit, uint8 of shape
    (n, b, length)) is set.  Lazy bits are derived on demand and never
    stored; materialize() realizes any station slice.
    """

    schedule: SectionSchedule
    length: int
    seed: Optional[int] = None
    bits: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.seed is None) == (self.bits is None):
            raise ValueError("exactly one of seed and bits must be given")
        if not 1 <= self.length <= self.schedule.length:
            raise ValueError(
                f"length {self.length} outside [1, {self.schedule.length}]"
            )
        if self.bits is not None:
            arr = np.ascontiguousarray(self.bits, dtype=np.uint8)
            expected = (self.schedule.n, self.schedule.b, self.length)
            if arr.shape != expected:
                raise ValueError(f"bits shape {arr.shape} != {expected}")
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("bits must be 0/1 valued")
            object.__setattr__(self, "bits", arr)

    @classmethod
    def sampled(
        cls, schedule: SectionSchedule, seed: int, length: Optional[int] = None
    ) -> "TransmissionArray":
        return cls(schedule, schedule.length if length is None else length, seed=seed)

    @classmethod
    def explicit(cls, schedule: SectionSchedule, bits: np.ndarray) -> "TransmissionArray":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(schedule, bits.shape[2] if bits.ndim == 3 else 0, bits=bits)

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def b(self) -> int:
        return self.schedule.b

    @property
    def is_lazy(self) -> bool:
        return self.seed is not None

    def bit(self, station: int, channel: int, position: int) -> int:
        if not 1 <= station <= self.n:
            raise ValueError(f"station {station} out of range 1..{self.n}")
        if not 1 <= channel <= self.b:
            raise ValueError(f"channel {channel} out of range 1..{self.b}")
        if not 0 <= position < self.length:
            raise OutOfScheduleError(f"position {position} outside [0, {self.length})")
        if self.bits is not None:
            return int(self.bits[station - 1, channel - 1, position])
        p = self.schedule.bit_probability(self.schedule.stage_of_position(position), channel)
        return 1 if kernels.u01(kernels.derive(self.seed, station, channel, position)) < p else 0

    def materialize(self, stations: Optional[Sequence[int]] = None) -> np.ndarray:
        """Realize bits for the given stations (default all), shape (s, b, length)."""
        if stations is None:
            stations = range(1, self.n + 1)
        stations = list(stations)
        for u in stations:
            if not 1 <= u <= self.n:
                raise ValueError(f"station {u} out of range 1..{self.n}")
        if self.bits is not None:
            return self.bits[[u - 1 for u in stations], :, :].copy()
        return kernels.materialize_bits(
            self.seed,
            stations,
            self.b,
            np.array(self.schedule.gammas, dtype=np.int64),
            self.schedule.prob_table(),
            self.length,
        )

    def to_explicit(self) -> "TransmissionArray":
        if self.bits is not None:
            return self
        return TransmissionArray(self.schedule, self.length, bits=self.materialize())

    def channel_masks(self, stations: Optional[Sequence[int]] = None) -> np.ndarray:
        """Per-(position, channel) station bitmasks, shape (length, b) uint64.

        Bit i of masks[j, beta-1] is the bit of stations[i] at (beta, j);
        needs at most 64 stations.
        """
        if stations is None:
            stations = range(1, self.n + 1)
        stations = list(stations)
        if len(stations) > 64:
            raise ValueError("channel masks support at most 64 stations")
        bits = self.materialize(stations).astype(np.uint64)
        weights = (np.uint64(1) << np.arange(len(stations), dtype=np.uint64))[:, None, None]
        return np.ascontiguousarray((bits * weights).sum(axis=0).T)


def sample_array(
    schedule: SectionSchedule, seed: int, length: Optional[int] = None
) -> TransmissionArray:
    """Draw a fresh array for the schedule: lazy, reproducible from the seed."""
    return TransmissionArray.sampled(schedule, seed, length)


def bit(array: TransmissionArray, station: int, channel: int, position: int) -> int:
    return array.bit(station, channel, position)


_MAGIC = b"WAKEARR1"
_HEADER = struct.Struct("<8sBBQQQQQ")  # magic, kind, storage, n, b, length, c_num, c_den
_SEED = struct.Struct("<Q")
_KIND_CODES = {ScheduleKind.GENERAL: 0, ScheduleKind.MODIFIED: 1}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}


def save_array(array: TransmissionArray, path) -> None:
    """Write the array to `path` in the WAKEARR1 binary format.

    Lazy arrays store only their seed; explicit arrays pack bits in
    (station, channel, position) order, eight per byte, LSB first.
    """
    sched = array.schedule
    header = _HEADER.pack(
        _MAGIC,
        _KIND_CODES[sched.kind],
        0 if array.is_lazy else 1,
        sched.n,
        sched.b,
        array.length,
        sched.c.numerator,
        sched.c.denominator,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        if array.is_lazy:
            fh.write(_SEED.pack(array.seed))
        else:
            fh.write(np.packbits(array.bits.reshape(-1), bitorder="little").tobytes())


def load_array(path) -> TransmissionArray:
    """Read a WAKEARR1 file back into a TransmissionArray.

    Raises ArrayFormatError (with the failing byte offset) on bad magic,
    unknown kind/storage codes, inconsistent header fields, or a payload
    whose size disagrees with the header dimensions.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ArrayFormatError(len(blob), "truncated header")
    magic, kind_code, storage, n, b, length, c_num, c_den = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ArrayFormatError(0, f"bad magic {magic!r}")
    if kind_code not in _KIND_FROM_CODE:
        raise ArrayFormatError(8, f"unknown kind code {kind_code}")
    if storage not in (0, 1):
        raise ArrayFormatError(9, f"unknown storage code {storage}")
    if c_den == 0:
        raise ArrayFormatError(42, "zero denominator for c")
    try:
        schedule = SectionSchedule(_KIND_FROM_CODE[kind_code], n, b, Fraction(c_num, c_den))
    except ValueError as exc:
        raise ArrayFormatError(10, f"invalid schedule parameters: {exc}") from None
    body = blob[_HEADER.size :]
    if storage == 0:
        if len(body) != _SEED.size:
            raise ArrayFormatError(_HEADER.size, f"seed payload must be 8 bytes, got {len(body)}")
        try:
            return TransmissionArray(schedule, length, seed=_SEED.unpack(body)[0])
        except ValueError as exc:
            raise ArrayFormatError(26, f"invalid length: {exc}") from None
    expected = -(-n * b * length // 8)
    if len(body) != expected:
        raise ArrayFormatError(
            _HEADER.size,
            f"payload is {len(body)} bytes, header implies {expected}",
        )
    flat = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="little")
    try:
        return TransmissionArray(
            schedule, length, bits=flat[: n * b * length].reshape(n, b, length)
        )
    except ValueError as exc:
        raise ArrayFormatError(26, f"invalid length: {exc}") from None
