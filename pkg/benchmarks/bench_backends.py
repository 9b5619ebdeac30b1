"""Compare the numba-compiled kernels against the pure-numpy fallback.

Runs itself twice (SOFTFLOW_BACKEND=numba / numpy) and times the three hot
paths: steady solves in bulk, a transient integration, and per-frame arc
fits.  Usage:

    python benchmarks/bench_backends.py            # both backends
    SOFTFLOW_BACKEND=numpy python benchmarks/bench_backends.py --inner
"""

import json
import os
import subprocess
import sys
import time


def timed(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def inner():
    import numpy as np

    from softflow.backend import backend_name
    from softflow.actuator import SourceSpec
    from softflow.assembly import GripperAssembly, build_gripper_network
    from softflow.circuit import ControlSchedule, simulate_transient, solve_steady
    from softflow.fluids import default_fluid_library
    from softflow.mocap import fit_arc, synthesize_markers

    water = default_fluid_library()["water_20c"]
    gnet = build_gripper_network(GripperAssembly(source=SourceSpec("pressure", 2e5)), water)

    def steady_batch(n=200):
        for i in range(n):
            solve_steady(gnet.network,
                         source_overrides={gnet.supply_element: 1e5 + 500.0 * i})

    def transient_run():
        simulate_transient(gnet.network, ControlSchedule(), t_end=4.0, dt=0.01)

    rng = np.random.default_rng(0)
    tracks = [synthesize_markers(20.0, 0.1) + rng.normal(0, 0.1, (4, 2))
              for _ in range(2000)]

    def fit_batch():
        for pts in tracks:
            fit_arc(pts)

    # warm-up triggers JIT compilation so timings measure steady-state cost
    steady_batch(3)
    transient_run()
    fit_batch()

    results = {
        "backend": backend_name(),
        "steady_200_solves_s": timed(steady_batch),
        "transient_400_steps_s": timed(transient_run),
        "arc_fit_2000_frames_s": timed(fit_batch),
    }
    print(json.dumps(results))


def main():
    if "--inner" in sys.argv:
        inner()
        return
    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SOFTFLOW_BACKEND=backend)
        proc = subprocess.run([sys.executable, __file__, "--inner"],
                              env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(proc.stdout.strip().splitlines()[-1]))
    width = 26
    print(f"{'case':<{width}} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for key in ("steady_200_solves_s", "transient_400_steps_s", "arc_fit_2000_frames_s"):
        nb, np_ = rows[0][key], rows[1][key]
        print(f"{key:<{width}} {nb:>12.4f} {np_:>12.4f} {np_ / nb:>8.1f}x")


if __name__ == "__main__":
    main()
