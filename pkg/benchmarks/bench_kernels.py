"""Compare the compiled cost kernel with the plain-Python fallback.

Each backend runs in its own interpreter because the JIT switch is read at
import time. Both cost the same pruned candidate block and the result arrays
are checked for equality.

    python3 benchmarks/bench_kernels.py [--rows N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from flashx import kernels
from flashx._jit import backend_name
from flashx.hardware import builtin_hardware
from flashx.search import block_params, iter_blocks
from flashx.workload import builtin_workload

rows = int(sys.argv[1])
hw = builtin_hardware("edge")
w = builtin_workload("VI")
blocks = iter_blocks("maeri", w, hw, "all", ("MNK",))
prm = np.concatenate([block_params(b, w, hw) for b in blocks])[:rows]

kernels.evaluate(prm[:2], hw.noc_bandwidth_bytes_per_cycle)  # compile / warm up
t = time.perf_counter()
out = kernels.evaluate(prm, hw.noc_bandwidth_bytes_per_cycle)
dt = time.perf_counter() - t
print(json.dumps({"backend": backend_name(), "rows": len(prm), "seconds": dt,
                  "checksum": int(out.sum()), "runtime_min": int(out[:, 3].min())}))
"""


def run(rows, disable_jit):
    env = dict(os.environ, FLASHX_DISABLE_JIT="1" if disable_jit else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(rows)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    args = ap.parse_args()

    jit = run(args.rows, disable_jit=False)
    py = run(args.rows, disable_jit=True)
    for r in (jit, py):
        rate = r["rows"] / r["seconds"]
        print(f"{r['backend']:>7}: {r['rows']} mappings in {r['seconds']:.3f} s ({rate:,.0f} per s)")
    print(f"speedup: {py['seconds'] / jit['seconds']:.1f}x")
    same = jit["checksum"] == py["checksum"] and jit["runtime_min"] == py["runtime_min"]
    print("results identical" if same else "RESULTS DIFFER")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
