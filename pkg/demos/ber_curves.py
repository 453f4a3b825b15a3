"""
Uncoded BER of the distributed space-time codes
===============================================

Rate-one codes (4 symbols over 4 slots or 2 over 2) and rate-two codes
(twice as many symbols per slot) on i.i.d. Rayleigh fading with two
receive antennas and ML detection by sphere decoding.
"""

import numpy as np

from dstc_sim.sim import BerExperiment, diversity_slope, run_snr_sweep

groups = {
    "rate one": (["jafarkhani", "l2", "r1-alamouti"], tuple(np.arange(0.0, 13.0, 2.0))),
    "rate two": (["3d", "sm-4x2", "r2-alamouti"], tuple(np.arange(4.0, 21.0, 2.0))),
}

for title, (codes, snr) in groups.items():
    print(f"\n{title}, QPSK")
    print(f"{'SNR dB':>8}" + "".join(f"{c:>14}" for c in codes))
    # A modest error target keeps this demo under a minute.
    curves = {c: run_snr_sweep(BerExperiment(c, "qpsk", snr, min_bit_errors=200, max_codewords=200_000))
              for c in codes}
    for i, s in enumerate(snr):
        print(f"{s:8.0f}" + "".join(f"{curves[c][i].ber:14.2e}" for c in codes))
    slopes = {c: diversity_slope(curves[c], 1e-4, 3e-2) for c in codes}
    print("slope between 1e-4 and 3e-2: " + ", ".join(f"{c} {v:.2f}" for c, v in slopes.items()))
