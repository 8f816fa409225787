"""Experiment harness: seeded trial batches, reports, sweeps, generate+verify.

Per-trial seeds are derived injectively from the base seed, activation
patterns are drawn from a trial-local stream, and jamming shares its
uniforms across jam probabilities — so sweeps over p are paired trial by
trial, and rerunning any spec reproduces its CSV/JSON byte for byte.
Wall-clock timing is kept on the in-memory report only; serialized outputs
contain nothing machine- or time-dependent.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time as _time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from wakesim import kernels
from wakesim.analysis import VerifyResult, verify_waking_small
from wakesim.model import ActivationPattern, NetworkConfig
from wakesim.protocols import (
    ScreeningConfig,
    run_channel_screening,
    run_wakeup_array,
    screening_round_bound,
)
from wakesim.schedules import (
    ScheduleKind,
    SectionSchedule,
    TransmissionArray,
    load_array,
    sample_array,
)

PROTOCOLS = ("screening", "array-general", "array-modified")
OVERLAY_KINDS = (
    "fixed",
    "screening",
    "lower",
    "upper-general",
    "upper-many",
    "upper-general-jam",
    "upper-many-jam",
)


@dataclass(frozen=True)
class PatternSpec:
    """Per-trial activation pattern generator.

    simultaneous: a fresh uniformly random k-subset each trial, all at 0
    (the whole network when k = n).  staggered: random k-subset with offsets
    uniform in [0, window], shifted so the earliest is 0.  explicit: the
    given activation map every trial.
    """

    kind: str
    k: Optional[int] = None
    window: int = 0
    activations: Optional[dict[int, int]] = None

    def __post_init__(self):
        if self.kind not in ("simultaneous", "staggered", "explicit"):
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.activations:
                raise ValueError("explicit pattern needs activations")
        else:
            if self.k is None or self.k < 1:
                raise ValueError("pattern needs k >= 1")
            if self.kind == "staggered" and self.window < 0:
                raise ValueError(f"window must be >= 0, got {self.window}")


@dataclass(frozen=True)
class Overlay:
    """A named round bound to compare wake-up times against."""

    label: str
    kind: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in OVERLAY_KINDS:
            raise ValueError(f"unknown overlay kind {self.kind!r}")
        if self.kind == "fixed" and self.value is None:
            raise ValueError("fixed overlay needs a value")


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete description of a trial batch; the JSON config mirrors this."""

    protocol: str
    n: int
    b: int
    pattern: PatternSpec
    trials: int
    base_seed: int
    jam_prob: float = 0.0
    k: Optional[int] = None
    epsilon: float = 0.05
    t_max: Optional[int] = None
    c: float = 4.0
    array_seed: Optional[int] = None
    array_path: Optional[str] = None
    array_length: Optional[int] = None
    overlays: tuple[Overlay, ...] = ()
    csv_path: Optional[str] = None
    json_path: Optional[str] = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        object.__setattr__(self, "overlays", tuple(self.overlays))
        if self.protocol != "screening":
            if self.array_seed is None and self.array_path is None:
                raise ValueError("array protocols need array_seed or array_path")

    @property
    def net(self) -> NetworkConfig:
        return NetworkConfig(n=self.n, b=self.b, jam_prob=self.jam_prob)

    def effective_k(self) -> int:
        if self.k is not None:
            return self.k
        if self.pattern.k is not None:
            return self.pattern.k
        if self.pattern.activations:
            return len(self.pattern.activations)
        raise ValueError("cannot infer k; set spec.k")


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    wakeup_time: Optional[int]
    truncated: bool
    rounds: int


@dataclass(frozen=True)
class ExperimentReport:
    """Results of one trial batch plus derived statistics.

    wall_seconds is informational only and never serialized; everything
    else is a pure function of (spec, base_seed).
    """

    spec: ExperimentSpec
    rows: tuple[TrialRow, ...]
    quantiles: dict[str, Optional[int]]
    exceedance: tuple[dict, ...]
    completed: int
    truncated: int
    wall_seconds: float = field(compare=False)

    def csv_text(self) -> str:
        lines = ["trial,seed,wakeup_time,truncated,rounds"]
        for r in self.rows:
            wt = "" if r.wakeup_time is None else str(r.wakeup_time)
            lines.append(f"{r.trial},{r.seed},{wt},{int(r.truncated)},{r.rounds}")
        return "\n".join(lines) + "\n"

    def json_dict(self) -> dict:
        return {
            "spec": spec_to_dict(self.spec),
            "trials": len(self.rows),
            "completed": self.completed,
            "truncated": self.truncated,
            "quantiles": self.quantiles,
            "exceedance": list(self.exceedance),
        }

    def json_text(self) -> str:
        return json.dumps(self.json_dict(), sort_keys=True, indent=2) + "\n"

    def exceedance_rate(self, label: str) -> Optional[float]:
        for entry in self.exceedance:
            if entry["label"] == label:
                return entry["rate"]
        raise KeyError(f"no overlay labeled {label!r}")


def pattern_to_dict(p: PatternSpec) -> dict:
    d: dict = {"kind": p.kind}
    if p.k is not None:
        d["k"] = p.k
    if p.kind == "staggered":
        d["window"] = p.window
    if p.activations is not None:
        d["activations"] = {str(u): s for u, s in sorted(p.activations.items())}
    return d


def pattern_from_dict(d: dict) -> PatternSpec:
    acts = d.get("activations")
    if acts is not None:
        acts = {int(u): int(s) for u, s in acts.items()}
    return PatternSpec(
        kind=d["kind"], k=d.get("k"), window=d.get("window", 0), activations=acts
    )


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "protocol": spec.protocol,
        "n": spec.n,
        "b": spec.b,
        "jam_prob": spec.jam_prob,
        "pattern": pattern_to_dict(spec.pattern),
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "k": spec.k,
        "epsilon": spec.epsilon,
        "t_max": spec.t_max,
        "c": spec.c,
        "array_seed": spec.array_seed,
        "array_path": spec.array_path,
        "array_length": spec.array_length,
        "overlays": [
            {"label": o.label, "kind": o.kind, "value": o.value} for o in spec.overlays
        ],
        "csv_path": spec.csv_path,
        "json_path": spec.json_path,
    }


def spec_from_dict(d: dict) -> ExperimentSpec:
    """Build a spec from a JSON config dict; unknown keys are rejected."""
    known = {
        "protocol", "n", "b", "jam_prob", "pattern", "trials", "base_seed",
        "k", "epsilon", "t_max", "c", "array_seed", "array_path",
        "array_length", "overlays", "csv_path", "json_path",
    }
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    for req in ("protocol", "n", "b", "pattern", "trials", "base_seed"):
        if req not in d:
            raise ValueError(f"config is missing required key {req!r}")
    overlays = tuple(
        Overlay(label=o["label"], kind=o["kind"], value=o.get("value"))
        for o in d.get("overlays", ())
    )
    return ExperimentSpec(
        protocol=d["protocol"],
        n=int(d["n"]),
        b=int(d["b"]),
        pattern=pattern_from_dict(d["pattern"]),
        trials=int(d["trials"]),
        base_seed=int(d["base_seed"]),
        jam_prob=float(d.get("jam_prob", 0.0)),
        k=d.get("k"),
        epsilon=float(d.get("epsilon", 0.05)),
        t_max=d.get("t_max"),
        c=float(d.get("c", 4.0)),
        array_seed=d.get("array_seed"),
        array_path=d.get("array_path"),
        array_length=d.get("array_length"),
        overlays=overlays,
        csv_path=d.get("csv_path"),
        json_path=d.get("json_path"),
    )


def draw_pattern(pspec: PatternSpec, n: int, trial_seed: int) -> ActivationPattern:
    """Instantiate the pattern for one trial from its private stream."""
    if pspec.kind == "explicit":
        return ActivationPattern(pspec.activations)
    k = pspec.k
    if k > n:
        raise ValueError(f"pattern k={k} exceeds n={n}")
    key = kernels.derive(trial_seed, kernels.DOMAIN_PATTERN)
    if k == n:
        stations = list(range(1, n + 1))
    else:
        skey = kernels.derive(key, 0)
        pool = list(range(1, n + 1))
        for j in range(k):  # partial Fisher-Yates
            r = kernels.u01(kernels.derive(skey, j))
            idx = j + int(r * (n - j))
            pool[j], pool[idx] = pool[idx], pool[j]
        stations = pool[:k]
    if pspec.kind == "simultaneous":
        return ActivationPattern.simultaneous(stations)
    okey = kernels.derive(key, 1)
    offsets = [
        int(kernels.u01(kernels.derive(okey, i)) * (pspec.window + 1))
        for i in range(len(stations))
    ]
    base = min(offsets)
    return ActivationPattern({u: o - base for u, o in zip(stations, offsets)})


def _resolve_array(spec: ExperimentSpec) -> TransmissionArray:
    if spec.array_path is not None:
        return load_array(spec.array_path)
    kind = (
        ScheduleKind.GENERAL if spec.protocol == "array-general" else ScheduleKind.MODIFIED
    )
    schedule = SectionSchedule(kind, spec.n, spec.b, Fraction(spec.c).limit_denominator(10**9))
    return sample_array(schedule, spec.array_seed, spec.array_length)


def _resolve_overlay(spec: ExperimentSpec, overlay: Overlay) -> Optional[float]:
    from wakesim.analysis import deterministic_lower_bound, deterministic_upper_bounds

    if overlay.kind == "fixed":
        return float(overlay.value)
    k = spec.effective_k()
    if overlay.kind == "screening":
        return float(screening_round_bound(k, spec.b, spec.epsilon))
    if overlay.kind == "lower":
        return deterministic_lower_bound(spec.n, k, spec.b)
    ub = deterministic_upper_bounds(spec.n, k, spec.b, spec.jam_prob)
    return {
        "upper-general": ub.general,
        "upper-many": ub.many_channels,
        "upper-general-jam": ub.general_jam,
        "upper-many-jam": ub.many_channels_jam,
    }[overlay.kind]


def _nearest_rank(sorted_values: Sequence[int], q: float) -> Optional[int]:
    if not sorted_values:
        return None
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run the spec's trial batch and assemble (and optionally write) the report.

    Trial i uses seed derive(base_seed, i); its pattern, protocol draws, and
    jamming draws live in disjoint sub-streams of that seed.  Quantiles are
    over completed trials; exceedance rates count truncated trials as
    exceeding every bound.
    """
    start = _time.perf_counter()
    net = spec.net
    array = None if spec.protocol == "screening" else _resolve_array(spec)
    config = None
    if spec.protocol == "screening":
        config = ScreeningConfig(
            k=spec.effective_k(), b=spec.b, epsilon=spec.epsilon, t_max=spec.t_max
        )
    rows = []
    for i in range(spec.trials):
        ts = kernels.trial_seed(spec.base_seed, i)
        pattern = draw_pattern(spec.pattern, spec.n, ts)
        if spec.protocol == "screening":
            res = run_channel_screening(net, pattern, config, ts, record_trace=False)
        else:
            res = run_wakeup_array(
                net, pattern, array, ts, t_max=spec.t_max, record_trace=False
            )
        rows.append(
            TrialRow(
                trial=i,
                seed=ts,
                wakeup_time=res.wakeup_time,
                truncated=res.truncated,
                rounds=res.rounds_executed,
            )
        )
    completed = sorted(r.wakeup_time for r in rows if r.wakeup_time is not None)
    truncated = len(rows) - len(completed)
    quantiles = {
        f"p{int(q * 100)}": _nearest_rank(completed, q) for q in (0.5, 0.9, 0.95, 0.99)
    }
    exceedance = []
    for overlay in spec.overlays:
        value = _resolve_overlay(spec, overlay)
        rate = None
        if value is not None:
            exceed = sum(
                1 for r in rows if r.truncated or r.wakeup_time >= value
            )
            rate = exceed / len(rows)
        exceedance.append({"label": overlay.label, "value": value, "rate": rate})
    report = ExperimentReport(
        spec=spec,
        rows=tuple(rows),
        quantiles=quantiles,
        exceedance=tuple(exceedance),
        completed=len(completed),
        truncated=truncated,
        wall_seconds=_time.perf_counter() - start,
    )
    if spec.csv_path:
        with open(spec.csv_path, "w", newline="") as fh:
            fh.write(report.csv_text())
    if spec.json_path:
        with open(spec.json_path, "w") as fh:
            fh.write(report.json_text())
    return report


@dataclass(frozen=True)
class GenerateVerifyResult:
    """Outcome of sample-until-verified array generation.

    array/array_seed describe the first verified attempt (None when all
    attempts failed); pass_fraction is over all attempts, each of which is
    fully verified.
    """

    array: Optional[TransmissionArray]
    array_seed: Optional[int]
    attempts: int
    passes: int
    pass_fraction: float
    last_failure: Optional[VerifyResult]


def generate_and_verify(
    schedule: SectionSchedule,
    k: int,
    attempts: int,
    seed: int,
    horizon: Optional[int] = None,
    length: Optional[int] = None,
    family: str = "simultaneous",
    window: int = 0,
) -> GenerateVerifyResult:
    """Sample arrays with derived seeds and exhaustively verify each one.

    The default horizon is gamma_(ceil(log2 k) + 1) (clamped to the last
    stage), matching the wake-up guarantee window for <= k stations.
    attempts must be >= 1.
    """
    if attempts < 1:
        raise ValueError(f"attempts must be >= 1, got {attempts}")
    if horizon is None:
        horizon = schedule.gamma(min(_ceil_log2_int(k) + 1, schedule.max_stage))
    first_array = None
    first_seed = None
    passes = 0
    last_failure = None
    for attempt in range(attempts):
        arr_seed = kernels.derive(seed, attempt)
        arr = sample_array(schedule, arr_seed, length)
        verdict = verify_waking_small(arr, k, horizon, family=family, window=window)
        if verdict.ok:
            passes += 1
            if first_array is None:
                first_array = arr
                first_seed = arr_seed
        else:
            last_failure = verdict
    return GenerateVerifyResult(
        array=first_array,
        array_seed=first_seed,
        attempts=attempts,
        passes=passes,
        pass_fraction=passes / attempts,
        last_failure=last_failure,
    )


def _ceil_log2_int(x: int) -> int:
    return (x - 1).bit_length()


@dataclass(frozen=True)
class SweepResult:
    """Per-p reports of a paired jamming sweep plus 95th-percentile ratios."""

    p_values: tuple[float, ...]
    reports: tuple[ExperimentReport, ...]
    ratio_p95: dict[float, Optional[float]]


def jamming_sweep(spec: ExperimentSpec, p_values: Sequence[float]) -> SweepResult:
    """Re-run the spec at each jam probability with identical trial seeds.

    Patterns and protocol draws are p-independent and the jamming uniforms
    are shared, so trials pair exactly across p values.  Output paths get a
    .p{index} tag; the base spec's paths are left to the caller (summary).
    """
    reports = []
    for idx, p in enumerate(p_values):
        sub = dataclasses.replace(
            spec,
            jam_prob=p,
            csv_path=_tagged(spec.csv_path, idx),
            json_path=_tagged(spec.json_path, idx),
        )
        reports.append(run_experiment(sub))
    base = None
    for p, rep in zip(p_values, reports):
        if p == 0.0:
            base = rep.quantiles["p95"]
    ratios = {}
    for p, rep in zip(p_values, reports):
        q = rep.quantiles["p95"]
        if base not in (None, 0) and q is not None:
            ratios[p] = q / base
        else:
            ratios[p] = None
    return SweepResult(
        p_values=tuple(float(p) for p in p_values),
        reports=tuple(reports),
        ratio_p95=ratios,
    )


def _tagged(path: Optional[str], idx: int) -> Optional[str]:
    if path is None:
        return None
    stem, dot, ext = path.rpartition(".")
    if not dot:
        return f"{path}.p{idx}"
    return f"{stem}.p{idx}.{ext}"


def sweep_json_dict(sweep: SweepResult) -> dict:
    return {
        "p_values": list(sweep.p_values),
        "reports": [r.json_dict() for r in sweep.reports],
        "ratio_p95": {str(p): sweep.ratio_p95[p] for p in sweep.p_values},
    }
