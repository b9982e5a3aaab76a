"""Compare the numba and numpy kernel backends.

Kernel timings call both implementations directly in one process.  The
end-to-end timing runs a full dFGSM / BGA evaluation in two subprocesses, one
with ``ADVIDS_DISABLE_NUMBA=1``, since the backend is fixed at import.

    python3 benchmarks/bench_kernels.py [--rows 4096] [--features 28] [--repeat 20]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from advids import kernels as K

E2E = r"""
import json, time
import numpy as np
from advids import kernels
from advids.attacks import AttackConfig
from advids.metrics import perturb
from advids.nn import init_network
rng = np.random.default_rng(0)
net = init_network([{m}, 300, 100, 40, 2], 0)
X = rng.uniform(size=({n}, {m}))
out = {{"backend": kernels.BACKEND}}
for method in ("dfgsm", "bga", "bca"):
    cfg = AttackConfig(method, 0.1, 0.025, 50)
    perturb(net, cfg, X[:8])  # compile outside the timing
    t = time.perf_counter()
    perturb(net, cfg, X)
    out[method] = time.perf_counter() - t
print(json.dumps(out))
"""


def _time(fn, args, repeat):
    fn(*args)  # warm-up, triggers numba compilation
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def kernel_table(n, m, repeat):
    rng = np.random.default_rng(0)
    x0 = rng.uniform(size=(n, m))
    x = np.clip(x0 + rng.uniform(-0.1, 0.1, (n, m)), 0, 1)
    g = rng.normal(size=(n, m))
    lo, hi = np.zeros(m), np.ones(m)
    ids = np.arange(n)
    bins, y = rng.integers(0, 10, 50 * n), rng.integers(0, 2, 50 * n)
    cases = {
        "project": (x, x0, 0.1, lo, hi),
        "sign_step": (x, x0, g, 0.01, 0.1, lo, hi),
        "bga_step": (x, x0, g, 0.01, 0.1, lo, hi),
        "bca_step": (x, x0, g, 0.01, 0.1, lo, hi),
        "row_hashes": (x, ids, 1e6),
        "joint_counts": (bins, y, 10),
    }
    print(f"kernels on {n} x {m} (best of {repeat}), numba available: {K.NUMBA_AVAILABLE}")
    print(f"{'kernel':<14}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, args in cases.items():
        t_np = _time(getattr(K, name + "_np"), args, repeat)
        t_nb = _time(getattr(K, name + "_nb"), args, repeat)
        print(f"{name:<14}{1e3 * t_np:>10.3f}{1e3 * t_nb:>10.3f}{t_np / t_nb:>8.1f}x")


def end_to_end(n, m):
    code = E2E.format(n=n, m=m)
    results = []
    for disable in ("0", "1"):
        env = dict(os.environ, ADVIDS_DISABLE_NUMBA=disable)
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout))
    print(f"\nend-to-end attack evaluation, {n} rows x {m} features, 300/100/40 net, 50 iterations")
    print(f"{'method':<8}" + "".join(f"{r['backend'] + ' s':>10}" for r in results))
    for method in ("dfgsm", "bga", "bca"):
        print(f"{method:<8}" + "".join(f"{r[method]:>10.2f}" for r in results))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--features", type=int, default=28)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    kernel_table(args.rows, args.features, args.repeat)
    if not args.skip_e2e:
        end_to_end(args.rows, args.features)


if __name__ == "__main__":
    main()
