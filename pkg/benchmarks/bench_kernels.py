"""Benchmark the compiled kernels against the pure fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from wakesim import _kernels_py
from wakesim.schedules import ScheduleKind, SectionSchedule, sample_array

try:
    from wakesim import _kernels_c
except ImportError:
    _kernels_c = None

REPEAT = 5


def best_of(fn, repeat=REPEAT):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_materialize(k):
    sched = SectionSchedule(ScheduleKind.GENERAL, 64, 2, 4)
    gammas = np.array(sched.gammas, dtype=np.int64)
    probs = sched.prob_table()
    stations = list(range(1, 65))
    return lambda: k.materialize_bits(2024, stations, 2, gammas, probs, sched.length)


def bench_screening(k):
    probs = np.array([64 ** (-b / 2) for b in (1, 2)])
    ids = np.arange(1, 65, dtype=np.int64)
    keys = np.array([_kernels_py.derive(7, 11, u) for u in ids], dtype=np.uint64)

    def run():
        for t in range(2000):
            k.screening_round(keys, ids, t, probs)

    return run


def bench_isolated(k):
    sched = SectionSchedule(ScheduleKind.GENERAL, 16, 2, 4)
    masks = sample_array(sched, 99).channel_masks()

    def run():
        for sub in range(1, 2000):
            k.first_isolated(masks, sub, masks.shape[0] - 1)

    return run


def bench_array_round(k):
    sched = SectionSchedule(ScheduleKind.GENERAL, 16, 2, 4)
    rows = np.ascontiguousarray(sample_array(sched, 5).materialize([1, 2, 3, 4]))
    sigmas = np.array([0, 1, 2, 0], dtype=np.int64)
    ids = np.array([1, 2, 3, 4], dtype=np.int64)

    def run():
        for t in range(2000):
            k.array_round(rows, sigmas, ids, t)

    return run


BENCHES = [
    ("materialize_bits (64x2 full schedule)", bench_materialize),
    ("screening_round x2000 (w=64, b=2)", bench_screening),
    ("first_isolated x2000 subsets", bench_isolated),
    ("array_round x2000 (4 stations)", bench_array_round),
]


def main():
    if _kernels_c is None:
        print("compiled backend not built; showing pure fallback only")
    print(f"{'kernel':<42} {'python':>10} {'cython':>10} {'speedup':>8}")
    for name, make in BENCHES:
        t_py = best_of(make(_kernels_py))
        if _kernels_c is not None:
            t_cy = best_of(make(_kernels_c))
            print(f"{name:<42} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms {t_py / t_cy:>7.1f}x")
        else:
            print(f"{name:<42} {t_py * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
