"""Compare the numba and numpy kernel backends.

Part one times each elementwise kernel in-process, both paths side by side.
Part two times a short design run end to end in two subprocesses, one per
backend (the backend is fixed at import time by ``MPLCQ_DISABLE_NUMBA``).

    python3 benchmarks/bench_kernels.py [--modes 8] [--repeat 20]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mplcq import _kernels as K

DESIGN_SNIPPET = """
import time
import numpy as np
from mplcq import _kernels
from mplcq.designer import DesignOptions, design
from mplcq.engine import MplcGeometry
from mplcq.optics import Grid, spot_basis
from mplcq.unitaries import haar_random
g = MplcGeometry(Grid(), 810e-9, 5, 76e-3)
m = spot_basis(g.grid, {modes})
U = haar_random({modes}, seed=1)
opts = DesignOptions(iterations={iters}, min_iterations={iters}, correct_phases=False)
design(m, m, U, g, DesignOptions(iterations=1, min_iterations=1, correct_phases=False))
t = time.perf_counter()
design(m, m, U, g, opts)
print(_kernels.backend(), time.perf_counter() - t)
"""


def kernel_cases(n, shape, rng):
    c = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    F, B, w = c(n, *shape), c(n, *shape), rng.random(n)
    ph, mask = c(*shape), rng.uniform(0, 2 * np.pi, shape)
    return {
        "coherent_sum": (F, B, w),
        "apply_phasor": (F, ph),
        "multiply_spectrum": (F, ph),
        "phase_to_phasor": (mask,),
    }


def bench_kernels(n, repeat):
    rng = np.random.default_rng(0)
    print(f"kernels, {n} modes on 512x512, best of {repeat} (ms)")
    print(f"{'kernel':<20}{'numpy':>10}{'numba':>10}{'speedup':>10}")
    for name, args in kernel_cases(n, (512, 512), rng).items():
        fnp, fnb = getattr(K, name + "_numpy"), getattr(K, name + "_numba")
        fnb(*args)  # compile
        assert np.allclose(fnp(*args), fnb(*args), rtol=1e-12, atol=1e-12)
        tnp = min(timeit.repeat(lambda: fnp(*args), number=1, repeat=repeat)) * 1e3
        tnb = min(timeit.repeat(lambda: fnb(*args), number=1, repeat=repeat)) * 1e3
        print(f"{name:<20}{tnp:>10.2f}{tnb:>10.2f}{tnp / tnb:>10.2f}")


def bench_design(n, iters):
    print(f"\ndesign, {n} modes, 5 planes, {iters} iterations (s)")
    code = DESIGN_SNIPPET.format(modes=n, iters=iters)
    for flag in ("1", "0"):
        env = dict(os.environ, MPLCQ_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"{backend:<20}{float(secs):>10.2f}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--skip-design", action="store_true")
    a = p.parse_args(argv)
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed")
    bench_kernels(a.modes, a.repeat)
    if not a.skip_design:
        bench_design(a.modes, a.iterations)


if __name__ == "__main__":
    main()
