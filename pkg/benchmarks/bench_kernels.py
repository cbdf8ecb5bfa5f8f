#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python reference.

Times the two hot loops (pipe-tree advection and stratified-tank stepping)
on a district-sized workload, plus one coupled simulated day end to end for
each backend. Run after `python3 setup.py build_ext --inplace`:

    python3 benchmarks/bench_kernels.py
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dhtwin.kernels import _ref  # noqa: E402

try:
    from dhtwin.kernels import _fast
except ImportError:
    _fast = None


def tree_workload(n_seg=36, cells_per_seg=8, seed=1):
    rng = np.random.default_rng(seed)
    seg_n = np.full(n_seg, cells_per_seg, dtype=np.int64)
    seg_off = np.arange(n_seg, dtype=np.int64) * cells_per_seg
    n_cells = n_seg * cells_per_seg
    return dict(
        tf=rng.uniform(60, 80, n_cells), tw=rng.uniform(55, 78, n_cells),
        seg_off=seg_off, seg_n=seg_n,
        cf_cell=rng.uniform(5e4, 2e5, n_seg), cw_cell=rng.uniform(5e3, 2e4, n_seg),
        ug_wk=rng.uniform(0.8, 2.5, n_seg), kfw_wk=rng.uniform(200, 600, n_seg),
        mdot=rng.uniform(0.0, 1.2, n_seg),
        feed_ptr=np.arange(n_seg + 1, dtype=np.int64),
        feed_kind=np.array([0] + [1] * (n_seg - 1), dtype=np.int64),
        feed_ref=np.array([0] + list(range(n_seg - 1)), dtype=np.int64),
        bnd_temp=np.array([80.0]), bnd_mdot=np.array([1.2]),
    )


def bench_tree(impl, reps=2000):
    w = tree_workload()
    out = np.zeros(len(w["seg_n"]))
    tic = time.perf_counter()
    for _ in range(reps):
        impl.advance_tree(w["tf"], w["tw"], w["seg_off"], w["seg_n"],
                          w["cf_cell"], w["cw_cell"], w["ug_wk"], w["kfw_wk"],
                          w["mdot"], w["feed_ptr"], w["feed_kind"], w["feed_ref"],
                          w["bnd_temp"], w["bnd_mdot"], 10.0, 4186.0, 60.0, 3, out)
    return (time.perf_counter() - tic) / reps * 1e6


def bench_tank(impl, reps=20000):
    temps = np.array([80.0, 75.0, 68.0, 60.0])
    caps = np.full(4, 1.4e7)
    ua = np.full(4, 4.0)
    tic = time.perf_counter()
    for _ in range(reps):
        impl.tank_step(temps, caps, 0.8, 80.0, 0.9, 55.0, ua, 15.0, 2.0,
                       4186.0, 60.0, 1)
    return (time.perf_counter() - tic) / reps * 1e6


def bench_coupled_day(backend):
    import importlib
    import os

    os.environ["DHTWIN_KERNELS"] = backend
    for mod in list(sys.modules):
        if mod.startswith("dhtwin"):
            del sys.modules[mod]
    from dhtwin import cosim
    from dhtwin.loads import read_weather
    from dhtwin.scenario import load_scenario
    from dhtwin.simulate import build_graph, build_profiles

    root = Path(__file__).resolve().parent.parent
    sc = load_scenario(root / "scenarios" / "district29.json")
    weather = read_weather(sc.weather_path)
    profiles = build_profiles(sc)
    graph, _ = build_graph(sc, "v1", profiles, weather)
    t0 = sc.month_window("jan")[1]
    tic = time.perf_counter()
    cosim.run(graph, sc.master, t0, t0 + 86400.0)
    del os.environ["DHTWIN_KERNELS"]
    return time.perf_counter() - tic


def main():
    print(f"{'kernel':<28}{'python':>12}{'cython':>12}{'speedup':>9}")
    rows = [
        ("advance_tree (36x8 cells)", bench_tree, " us/call"),
        ("tank_step (4 layers)", bench_tank, " us/call"),
    ]
    for name, fn, unit in rows:
        t_py = fn(_ref)
        if _fast is not None:
            t_cy = fn(_fast)
            print(f"{name:<28}{t_py:>10.1f}{unit[:2]}{t_cy:>10.1f}{unit[:2]}"
                  f"{t_py / t_cy:>8.1f}x")
        else:
            print(f"{name:<28}{t_py:>10.1f}{unit[:2]}{'n/a':>12}{'':>9}")

    print()
    t_py = bench_coupled_day("python")
    line = f"{'coupled day, 29 buildings':<28}{t_py:>10.2f} s"
    if _fast is not None:
        t_cy = bench_coupled_day("cython")
        line += f"{t_cy:>10.2f} s{t_py / t_cy:>8.1f}x"
    print(line)
    if _fast is None:
        print("\ncompiled backend missing; build it with "
              "`python3 setup.py build_ext --inplace`")


if __name__ == "__main__":
    main()
