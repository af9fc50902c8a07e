"""Benchmark the MPC mesh search with the numba kernels against the
pure-numpy fallback (AQUAPLAN_NO_NUMBA=1).

Run from the repository root:

    python3 benchmarks/bench_mesh.py [--steps N]

The script re-executes itself in a subprocess for each variant so the
environment flag takes effect before the package is imported.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def measure(steps: int) -> dict:
    import numpy as np

    from aquaplan import _kernels
    from aquaplan.control import Dynamics, MpcConfig, mpc_step
    from aquaplan.network import build_example_plant

    model = build_example_plant()
    dyn = Dynamics(model=model, dt=2.5)
    cfg = MpcConfig()
    x = np.array([86.0, 86.0])
    fd = np.full(cfg.horizon, 3472.0)
    phi = np.full(cfg.horizon, 0.28)
    cin = np.full(cfg.horizon, 22.0)

    t0 = time.perf_counter()
    mpc_step(dyn, x, 22.0, fd, phi, cin, cfg)  # includes JIT compile
    warmup = time.perf_counter() - t0

    t0 = time.perf_counter()
    for _ in range(steps):
        mpc_step(dyn, x, 22.0, fd, phi, cin, cfg)
    elapsed = time.perf_counter() - t0

    mesh_points = 1
    for r in cfg.resolution:
        mesh_points *= r
    return {
        "backend": "numba" if _kernels.USING_NUMBA else "numpy",
        "steps": steps,
        "mesh_points": mesh_points,
        "warmup_s": warmup,
        "total_s": elapsed,
        "ms_per_step": 1000.0 * elapsed / steps,
        "rollouts_per_s": steps * mesh_points / elapsed,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=50,
                        help="controller steps per variant (default 50)")
    parser.add_argument("--variant", choices=("numba", "numpy"),
                        help=argparse.SUPPRESS)  # internal re-exec hook
    args = parser.parse_args()

    if args.variant:
        print(json.dumps(measure(args.steps)))
        return 0

    results = []
    for variant in ("numba", "numpy"):
        env = dict(os.environ,
                   AQUAPLAN_NO_NUMBA="1" if variant == "numpy" else "0")
        proc = subprocess.run(
            [sys.executable, __file__, "--steps", str(args.steps),
             "--variant", variant],
            env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    print(f"{'backend':<10}{'ms/step':>12}{'rollouts/s':>16}"
          f"{'warmup (s)':>14}")
    for r in results:
        print(f"{r['backend']:<10}{r['ms_per_step']:>12.2f}"
              f"{r['rollouts_per_s']:>16.0f}{r['warmup_s']:>14.2f}")
    speedup = results[1]["ms_per_step"] / results[0]["ms_per_step"]
    print(f"\nnumba speedup: {speedup:.1f}x "
          f"({results[0]['mesh_points']} mesh points, "
          f"{results[0]['steps']} steps per variant)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
