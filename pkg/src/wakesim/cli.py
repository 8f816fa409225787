"""Command-line front end.

Subcommands: simulate, gen-array, verify, bench, bounds.  Exit codes:
0 = the command ran to completion (verdicts, even negative ones, are output,
not failures), 2 = usage errors (argparse), 3 = bad config or input files.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from wakesim import kernels
from wakesim.analysis import (
    BudgetExceededError,
    QuerySequence,
    check_selective,
    deterministic_lower_bound,
    deterministic_upper_bounds,
    find_blocking_activation,
    verify_waking_small,
)
from wakesim.harness import (
    PatternSpec,
    draw_pattern,
    jamming_sweep,
    run_experiment,
    spec_from_dict,
    sweep_json_dict,
)
from wakesim.model import NetworkConfig
from wakesim.protocols import (
    ScreeningConfig,
    run_channel_screening,
    run_wakeup_array,
    screening_round_bound,
)
from wakesim.schedules import (
    ArrayFormatError,
    ScheduleKind,
    SectionSchedule,
    load_array,
    sample_array,
    save_array,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3


class ConfigError(Exception):
    """Bad config/input file contents; reported with exit code 3."""


def _fmt(x) -> str:
    if x is None:
        return "suppressed"
    return f"{x:g}"


def _parse_pattern(text: str) -> PatternSpec:
    parts = text.split(":")
    if parts[0] == "simultaneous" and len(parts) == 2:
        return PatternSpec(kind="simultaneous", k=int(parts[1]))
    if parts[0] == "staggered" and len(parts) == 3:
        return PatternSpec(kind="staggered", k=int(parts[1]), window=int(parts[2]))
    if parts[0] == "explicit" and len(parts) == 2:
        activations = {}
        for item in parts[1].split(","):
            u, _, s = item.partition("=")
            activations[int(u)] = int(s)
        return PatternSpec(kind="explicit", activations=activations)
    raise ConfigError(
        f"bad pattern {text!r}; use simultaneous:K, staggered:K:W, or explicit:U=S,..."
    )


def _cmd_simulate(args) -> int:
    pspec = _parse_pattern(args.pattern)
    seed = kernels.trial_seed(args.seed, 0)
    if args.protocol == "screening":
        if args.n is None or args.b is None or args.k is None:
            raise ConfigError("screening needs --n, --b, and --k")
        net = NetworkConfig(args.n, args.b, args.p)
        config = ScreeningConfig(k=args.k, b=args.b, epsilon=args.epsilon, t_max=args.t_max)
        pattern = draw_pattern(pspec, net.n, seed)
        result = run_channel_screening(net, pattern, config, seed, record_trace=args.trace)
    else:
        if args.array is None:
            raise ConfigError("array protocol needs --array FILE")
        array = load_array(args.array)
        net = NetworkConfig(array.n, array.b, args.p)
        pattern = draw_pattern(pspec, net.n, seed)
        result = run_wakeup_array(
            net, pattern, array, seed, t_max=args.t_max, record_trace=args.trace
        )
    print(f"pattern: {dict(sorted(pattern.activations.items()))}")
    if result.truncated:
        print(f"truncated after {result.rounds_executed} rounds (no wake-up)")
    else:
        last = result.trace[-1] if result.trace else None
        where = ""
        if last is not None:
            for beta, fb in enumerate(last.per_channel, start=1):
                if fb is not None:
                    where = f" (station {fb} on channel {beta})"
                    break
        print(f"wakeup_time: {result.wakeup_time}{where}")
        print(f"rounds: {result.rounds_executed}")
    if args.trace and result.trace:
        for outcome in result.trace:
            heard = [
                f"ch{beta}<-{fb}"
                for beta, fb in enumerate(outcome.per_channel, start=1)
                if fb is not None
            ]
            jammed = ",".join(str(beta) for beta in sorted(outcome.jammed))
            print(
                f"  t={outcome.time} heard=[{' '.join(heard)}]"
                + (f" jammed=[{jammed}]" if jammed else "")
            )
    return EXIT_OK


def _cmd_gen_array(args) -> int:
    kind = ScheduleKind.GENERAL if args.kind == "general" else ScheduleKind.MODIFIED
    schedule = SectionSchedule(kind, args.n, args.b, Fraction(args.c).limit_denominator(10**9))
    array = sample_array(schedule, args.seed, args.length)
    if args.explicit:
        array = array.to_explicit()
    save_array(array, args.out)
    storage = "explicit" if args.explicit else "lazy"
    print(
        f"wrote {storage} {args.kind} array: n={array.n} b={array.b} "
        f"length={array.length} seed={args.seed} -> {args.out}"
    )
    return EXIT_OK


_BUILTIN_FAMILIES = {
    "singletons": lambda n: [[u] for u in range(1, n + 1)],
    "pairs": lambda n: [[u, u + 1] for u in range(1, n, 2)],
}


def _load_family(spec: str, n: int):
    if spec in _BUILTIN_FAMILIES:
        return _BUILTIN_FAMILIES[spec](n)
    try:
        with open(spec) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load family from {spec!r}: {exc}") from None
    if not isinstance(data, list) or not all(isinstance(x, list) for x in data):
        raise ConfigError("family file must be a JSON list of station lists")
    return data


def _cmd_verify_selective(args) -> int:
    family = _load_family(args.family, args.n)
    verdict = check_selective(family, args.n, args.k, mode=args.mode)
    if verdict.selective:
        print("selective")
    else:
        witness = ",".join(str(u) for u in sorted(verdict.witness))
        print(f"not selective; witness: {witness}")
    return EXIT_OK


def _cmd_verify_waking(args) -> int:
    array = load_array(args.array)
    result = verify_waking_small(
        array, args.k, args.horizon, family=args.family, window=args.window
    )
    if result.ok:
        print(f"verified: {result.patterns_checked} patterns wake by t={args.horizon}")
    else:
        acts = dict(sorted(result.counterexample.activations.items()))
        print(f"counterexample: {acts}")
    return EXIT_OK


def _cmd_verify_blocking(args) -> int:
    if not args.queries and not args.array:
        raise ConfigError("blocking check needs --array or --queries")
    if args.queries:
        try:
            with open(args.queries) as fh:
                data = json.load(fh)
            queries = QuerySequence(
                n=data["n"],
                b=data["b"],
                queries=tuple(
                    frozenset((int(u), int(beta)) for u, beta in step)
                    for step in data["queries"]
                ),
            )
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot load queries from {args.queries!r}: {exc}") from None
    else:
        array = load_array(args.array)
        queries = QuerySequence.from_array(array, min(args.t_limit, array.length))
    witness = find_blocking_activation(queries, args.k, args.t_limit)
    if witness is None:
        print("none: every size-k activation set is isolated somewhere")
    else:
        print(f"blocking set: {','.join(str(u) for u in sorted(witness))}")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    lb = deterministic_lower_bound(args.n, args.k, args.b)
    print(f"deterministic lower bound: {_fmt(lb)}")
    if args.epsilon is not None:
        lam = screening_round_bound(args.k, args.b, args.epsilon)
        print(f"screening rounds (epsilon={args.epsilon:g}): {lam}")
    ub = deterministic_upper_bounds(args.n, args.k, args.b, args.p)
    print(f"upper shape general: {_fmt(ub.general)}")
    print(f"upper shape many-channels: {_fmt(ub.many_channels)}")
    if args.p > 0:
        print(f"upper shape general under jamming: {_fmt(ub.general_jam)}")
        print(f"upper shape many-channels under jamming: {_fmt(ub.many_channels_jam)}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {args.config!r}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    p_values = raw.pop("p_values", None)
    try:
        spec = spec_from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from None
    if p_values:
        sweep = jamming_sweep(spec, [float(p) for p in p_values])
        if spec.json_path:
            with open(spec.json_path, "w") as fh:
                fh.write(json.dumps(sweep_json_dict(sweep), sort_keys=True, indent=2) + "\n")
            print(f"sweep summary -> {spec.json_path}")
        for p, rep in zip(sweep.p_values, sweep.reports):
            print(
                f"p={p:g}: completed={rep.completed} truncated={rep.truncated} "
                f"p95={rep.quantiles['p95']} ratio={_fmt(sweep.ratio_p95[p])}"
            )
    else:
        report = run_experiment(spec)
        qs = " ".join(f"{k}={v}" for k, v in report.quantiles.items())
        print(f"trials={len(report.rows)} completed={report.completed} "
              f"truncated={report.truncated} {qs}")
        for entry in report.exceedance:
            print(
                f"overlay {entry['label']}: value={_fmt(entry['value'])} "
                f"rate={_fmt(entry['rate'])}"
            )
        if spec.csv_path:
            print(f"rows -> {spec.csv_path}")
        if spec.json_path:
            print(f"summary -> {spec.json_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wakesim",
        description="Simulate and analyze wake-up protocols on multi-channel radio networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one protocol instance")
    p.add_argument("--protocol", choices=["screening", "array"], required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--array", help="array file (array protocol)")
    p.add_argument("--pattern", required=True, help="simultaneous:K | staggered:K:W | explicit:U=S,...")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--p", type=float, default=0.0, help="jamming probability")
    p.add_argument("--t-max", type=int, dest="t_max")
    p.add_argument("--trace", action="store_true", help="print per-round feedback")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen-array", help="sample a transmission array and save it")
    p.add_argument("--kind", choices=["general", "modified"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--c", type=float, default=4.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--length", type=int)
    p.add_argument("--explicit", action="store_true", help="store materialized bits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_array)

    p = sub.add_parser("verify", help="combinatorial checks")
    vsub = p.add_subparsers(dest="check", required=True)

    v = vsub.add_parser("selective", help="decide (n,k)-selectivity of a family")
    v.add_argument("--family", required=True, help="singletons | pairs | FILE.json")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--mode", choices=["exactly", "up-to"], default="exactly")
    v.set_defaults(func=_cmd_verify_selective)

    v = vsub.add_parser("waking", help="exhaustively verify wake-up for small patterns")
    v.add_argument("--array", required=True)
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--horizon", type=int, required=True)
    v.add_argument("--family", choices=["simultaneous", "staggered"], default="simultaneous")
    v.add_argument("--window", type=int, default=0)
    v.set_defaults(func=_cmd_verify_waking)

    v = vsub.add_parser("blocking", help="search for a blocking activation set")
    v.add_argument("--array", help="array file; queries = its prefix")
    v.add_argument("--queries", help="JSON file {n, b, queries: [[[u, beta], ...], ...]}")
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--t-limit", type=int, dest="t_limit", required=True)
    v.set_defaults(func=_cmd_verify_blocking)

    p = sub.add_parser("bench", help="run a trial batch from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("bounds", help="print round-complexity bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=_cmd_bounds)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArrayFormatError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
