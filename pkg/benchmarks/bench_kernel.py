"""Benchmark the compiled episode kernel against the pure-Python fallback.

Usage: python benchmarks/bench_kernel.py [duration_s]
"""

import sys
import time

from efkesim import _kernel_py, engine
from efkesim.config import ActuatorConfig, Environment
from efkesim.waveform import preset


def run(kernel, duration: float, dt: float):
    original = engine._kernel
    engine._kernel = kernel
    try:
        t0 = time.perf_counter()
        tel = engine.run_episode(ActuatorConfig(), preset("5kv-20-80"), Environment(),
                                 duration=duration, dt=dt)
        wall = time.perf_counter() - t0
    finally:
        engine._kernel = original
    steps = duration / dt
    return wall, steps, tel.net_displacement_m


def main() -> None:
    duration = float(sys.argv[1]) if len(sys.argv) > 1 else 5.0
    dt = engine.DT_DEFAULT
    kernels = [("pure-python", _kernel_py)]
    try:
        from efkesim import _kernel as compiled

        kernels.insert(0, ("compiled", compiled))
    except ImportError:
        print("compiled kernel not available; benchmarking fallback only")

    print(f"episode: 5 kV 20/80 ms, duration {duration} s, dt {dt * 1e6:.0f} us")
    results = {}
    for name, kernel in kernels:
        wall, steps, x = run(kernel, duration, dt)
        results[name] = (wall, x)
        print(f"  {name:12s} {wall * 1e3:9.1f} ms   {steps / wall / 1e6:7.2f} M steps/s"
              f"   displacement {x * 1e3:.6f} mm")
    if len(results) == 2:
        speedup = results["pure-python"][0] / results["compiled"][0]
        match = results["pure-python"][1] == results["compiled"][1]
        print(f"  speedup: {speedup:.1f}x; displacements bit-identical: {match}")


if __name__ == "__main__":
    main()
