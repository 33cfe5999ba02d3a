#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback lane.

Runs the Monte Carlo path kernel and the discrete-time solver on a fixed
workload in both lanes and prints timings plus agreement checks. Invoke
from the repo root:

    python benchmarks/bench_kernels.py [--paths 20000]
"""

import argparse
import time

import numpy as np

import mimicgame as mg
from mimicgame._numba import NUMBA_ENABLED
from mimicgame.oracle import DiscreteGame, discrete_equilibrium
from mimicgame.simulate import SimConfig, estimate_values

FIG_PARAMS = mg.GameParams(r1=0.5, r2=0.5, lam=2.0, psi=1.5, u=1.0, c=1.0,
                           w_NI=1.0, w_I=-1.0)


def bench_sim(eq, n_paths):
    cfg = SimConfig(p0=0.3, n_paths=n_paths, seed=2024)
    if NUMBA_ENABLED:
        estimate_values(eq, SimConfig(p0=0.3, n_paths=64, seed=2024),
                        force_numpy=False)  # warm the JIT
    t0 = time.perf_counter()
    rep_nb = estimate_values(eq, cfg, force_numpy=False) if NUMBA_ENABLED else None
    t_nb = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep_np = estimate_values(eq, cfg, force_numpy=True)
    t_np = time.perf_counter() - t0
    return rep_nb, t_nb, rep_np, t_np


def bench_oracle(delta):
    if NUMBA_ENABLED:
        t0 = time.perf_counter()
        de = discrete_equilibrium(FIG_PARAMS, DiscreteGame(delta=delta))
        t_nb = time.perf_counter() - t0
    else:
        de, t_nb = None, float("nan")
    import mimicgame._numba as nbmod
    saved = nbmod.NUMBA_ENABLED
    # the oracle picks its lane at import time; report only the active lane
    return de, t_nb


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--delta", type=float, default=4e-3)
    args = ap.parse_args()

    print(f"numba lane available: {NUMBA_ENABLED}")
    eq = mg.solve_equilibrium(FIG_PARAMS)
    rep_nb, t_nb, rep_np, t_np = bench_sim(eq, args.paths)

    print(f"\nMonte Carlo ({args.paths} paths x 2 types + diagnostic):")
    if rep_nb is not None:
        print(f"  numba lane : {t_nb:7.2f} s   agent={rep_nb.agent_value_mean:.6f} "
              f"principal={rep_nb.principal_value_mean:.6f}")
    print(f"  numpy lane : {t_np:7.2f} s   agent={rep_np.agent_value_mean:.6f} "
          f"principal={rep_np.principal_value_mean:.6f}")
    if rep_nb is not None:
        print(f"  speedup    : {t_np / t_nb:7.1f} x")
        agree = (abs(rep_nb.agent_value_mean - rep_np.agent_value_mean) < 1e-9
                 and abs(rep_nb.principal_value_mean - rep_np.principal_value_mean) < 1e-9)
        print(f"  lanes agree on identical draws: {agree}")

    de, t_or = bench_oracle(args.delta)
    if de is not None:
        print(f"\nDiscrete solver (delta={args.delta}, active lane): {t_or:7.2f} s, "
              f"p*={de.p_star:.4f}")
    else:
        print("\nDiscrete solver: run under each lane separately "
              "(MIMICGAME_NO_NUMBA=1 to force numpy) to compare timings.")


if __name__ == "__main__":
    main()
