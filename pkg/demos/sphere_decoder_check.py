"""
Sphere decoding against brute force
===================================

The effective real channel turns any code into ``y = G x + n``. The sphere
decoder must return the same decision as scanning all M**Q candidates.
"""

import time

import numpy as np

from dstc_sim.constellation import get_constellation
from dstc_sim.detect import DetectionProblem, DetectorStats, ml_exhaustive, sphere_decode_batch
from dstc_sim.stc import get_code, effective_real_channel, realvec

rng = np.random.default_rng(0)
code, con = get_code("3d"), get_constellation("qpsk")
n = 500

h = (rng.standard_normal((n, 2, 4)) + 1j * rng.standard_normal((n, 2, 4))) / np.sqrt(2)
s = con.points[rng.integers(con.size, size=(n, code.n_symbols))]
noise = (rng.standard_normal((n, 2, 4)) + 1j * rng.standard_normal((n, 2, 4))) * np.sqrt(0.1 / 2)
y = h @ code.encode(s) + noise  # 10 dB

g, yr = effective_real_channel(code, h), realvec(y)
print("G per codeword:", g.shape[1:], "real")

sphere_decode_batch(g[:1], yr[:1], con, code.n_symbols)  # load the compiled kernel
stats = DetectorStats()
t0 = time.perf_counter()
fast = sphere_decode_batch(g, yr, con, code.n_symbols, stats)
t1 = time.perf_counter()
slow = np.array([ml_exhaustive(DetectionProblem(g[i], yr[i], con, code.n_symbols)) for i in range(n)])
t2 = time.perf_counter()

print(f"candidates per codeword: {con.size ** code.n_symbols}")
print(f"sphere:     {1e6 * (t1 - t0) / n:8.1f} us/codeword, {stats.visited_nodes / n:.1f} nodes visited")
print(f"exhaustive: {1e6 * (t2 - t1) / n:8.1f} us/codeword")
print("identical decisions:", np.array_equal(fast, slow))
