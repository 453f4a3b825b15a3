"""
Unequal received power from the two sites
=========================================

A receiver near one transmitter hears the other one weaker. Here the two
sites' received powers differ by 0 to 20 dB at a fixed total SNR, and the
codes are paired at 4 bits/s/Hz: 16QAM for rate-one codes, QPSK for
rate-two codes.
"""

from dstc_sim.sim import BerExperiment, run_imbalance_sweep

snr_db = 8.0
imbalance = (0.0, 5.0, 10.0, 15.0, 20.0)
pairs = [("3d", "qpsk"), ("sm-4x2", "qpsk"), ("r2-alamouti", "qpsk"),
         ("l2", "16qam"), ("jafarkhani", "16qam"), ("r1-alamouti", "16qam")]

print(f"BER at {snr_db:g} dB")
print(f"{'imbalance dB':>14}" + "".join(f"{c:>14}" for c, _ in pairs))
rows = {}
for code, con in pairs:
    exp = BerExperiment(code, con, imbalance_grid=imbalance, min_bit_errors=5000)
    rows[code] = run_imbalance_sweep(exp, snr_db)
for i, imb in enumerate(imbalance):
    print(f"{imb:14.0f}" + "".join(f"{rows[c][i].ber:14.3e}" for c, _ in pairs))

# The 3D code keeps a Golden code inside each site, so losing one site
# still leaves a full-rate, full-diversity 2x2 code. R2-Alamouti sends
# different symbols from each site and collapses.
