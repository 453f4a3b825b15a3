"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import numpy as np
import pytest
from scipy.optimize import brentq

from dstc_sim import cli
from dstc_sim.capacity import (
    CapacityConfig,
    Scenario,
    calibrate_noise_variance,
    capacity_distributed,
    capacity_mimo,
    capacity_sfn,
    coverage_sweep,
)
from dstc_sim.channel import ChannelTaps, NoiseSpec, ScenarioGeometry, taps_to_freq_response
from dstc_sim.constellation import get_constellation
from dstc_sim.detect import DetectionProblem, ml_exhaustive, sphere_decode_batch
from dstc_sim.sim import BerExperiment, diversity_slope, run_ber_point
from dstc_sim.stc import CODES, effective_real_channel, realvec

from conftest import crandn


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance criterion {number}: {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def within(a, b, k=3.0):
    return abs(a.mean - b.mean) <= k * np.hypot(a.std_error, b.std_error)


# 1. sphere decoder exactness

def test_criterion_1_sphere_decoder_exact(report):
    n = 10_000
    rng = np.random.default_rng(1)
    checked, mismatches = [], 0
    for name, code in CODES.items():
        for con_name in ("qpsk", "16qam"):
            if code.n_symbols > 4 and con_name != "qpsk":
                continue
            con = get_constellation(con_name)
            for snr in (0.0, 10.0, 20.0):
                h = crandn(rng, n, code.n_rx, code.n_tx)
                s = con.points[rng.integers(con.size, size=(n, code.n_symbols))]
                y = h @ code.encode(s) + crandn(rng, n, code.n_rx, code.n_slots) * 10 ** (-snr / 20)
                g, yr = effective_real_channel(code, h), realvec(y)
                fast = sphere_decode_batch(g, yr, con, code.n_symbols)
                for i in range(n):
                    ref = ml_exhaustive(DetectionProblem(g[i], yr[i], con, code.n_symbols))
                    mismatches += not np.array_equal(fast[i], ref)
                checked.append(f"{name}/{con_name}/{snr:g}dB")
    report(1, mismatches == 0, f"{mismatches} mismatches over {n} instances x {len(checked)} (code, alphabet, SNR) cells")


# 2. capacity identities

def test_criterion_2_capacity_identities(report):
    cfg = CapacityConfig(20_000)
    failures = []
    for rho in (1.0, 10.0, 100.0):
        a = capacity_mimo(1, 1, rho, cfg, np.random.default_rng(1))
        b = capacity_sfn(1.0, 0.0, rho, CapacityConfig(20_000, power_split=(1.0, 0.0)), np.random.default_rng(2))
        if not within(a, b):
            failures.append(f"mimo(1,1) vs sfn(1,0) at rho={rho}: {a.mean:.4f} vs {b.mean:.4f}")
        lam1 = 0.6
        d = capacity_distributed(2, 2, lam1, 0.0, rho, cfg, np.random.default_rng(3))
        m = capacity_mimo(2, 2, rho * lam1 * cfg.power_split[0], cfg, np.random.default_rng(4))
        if not within(d, m):
            failures.append(f"distributed lambda2=0 at rho={rho}: {d.mean:.4f} vs {m.mean:.4f}")
        exact = 2 * np.log2(1 + rho / 2)
        eye = capacity_mimo(2, 2, rho, channels=np.eye(2)).mean
        both = capacity_distributed(2, 2, 1.0, 1.0, rho, channels=np.hstack([np.eye(2), np.eye(2)])[None]).mean
        if abs(eye - exact) > 1e-12 or abs(both - exact) > 1e-12:
            failures.append(f"H=I at rho={rho}: {eye!r}, {both!r} vs {exact!r}")
    report(2, not failures, "; ".join(failures) or "random identities within 3 SE, H=I cases exact to 1e-12")


# 3. coverage shape

def test_criterion_3_coverage_shape(report):
    geo = ScenarioGeometry((0.0, 10.0), 5.0, 3.5)
    cfg = CapacityConfig(20_000)
    var = calibrate_noise_variance(geo, cfg, 1.5)
    positions = [float(x) for x in np.arange(0.0, 10.0001, 0.25)]
    curves = {s: coverage_sweep(geo, s, NoiseSpec(var), cfg, positions) for s in Scenario}
    single = np.array([r.capacity for r in curves[Scenario.MIMO_SINGLE_CELL]])
    dist = np.array([r.capacity for r in curves[Scenario.MIMO_DISTRIBUTED]])
    sfn = np.array([r.capacity for r in curves[Scenario.SFN]])

    diff = single - dist
    sign_changes = np.flatnonzero(np.diff(np.sign(diff)) != 0)
    if len(sign_changes) == 1 and diff[0] > 0:
        i = sign_changes[0]
        crossover = positions[i] + diff[i] / (diff[i] - diff[i + 1]) * (positions[i + 1] - positions[i])
    else:
        crossover = float("nan")
    ok_a = 2.0 <= crossover <= 5.0

    ratio = dist / sfn
    ok_b = bool(np.all((ratio >= 1.6) & (ratio <= 2.4)))

    worst = 0.0
    for s in (Scenario.SFN, Scenario.MIMO_DISTRIBUTED):
        recs = curves[s]
        for a, b in zip(recs, recs[::-1]):
            worst = max(worst, abs(a.capacity - b.capacity) / np.hypot(a.std_error, b.std_error))
    ok_c = worst <= 3.0

    mid = sfn[positions.index(5.0)]
    detail = (f"noise variance {var:.4g}, SFN midpoint {mid:.3f} b/s/Hz; (a) crossover {crossover:.2f} km; "
              f"(b) distributed/SFN ratio in [{ratio.min():.3f}, {ratio.max():.3f}]; "
              f"(c) worst mirror-pair gap {worst:.2f} SE")
    report(3, ok_a and ok_b and ok_c and abs(mid - 1.5) < 0.05, detail)


# 4. diversity orderings

def _reduced_curve(name, errors=2000):
    recs = []
    for snr in np.arange(0.0, 31.0, 1.0):
        rec = run_ber_point(BerExperiment(name, "qpsk", min_bit_errors=errors), snr)
        if rec.ber < 1e-3:
            break
        recs.append(rec)
    return recs


def test_criterion_4_diversity_orderings(report):
    curves = {n: _reduced_curve(n) for n in ("l2", "jafarkhani", "r1-alamouti", "3d", "sm-4x2", "r2-alamouti")}
    assert all(r.bit_errors >= 400 for recs in curves.values() for r in recs)
    slope = {n: diversity_slope(recs, 1e-3, 1e-2) for n, recs in curves.items()}
    top = min(recs[-1].snr_db for n, recs in curves.items() if n in ("l2", "jafarkhani", "r1-alamouti"))
    at_top = {n: next(r.ber for r in curves[n] if r.snr_db == top) for n in ("l2", "jafarkhani", "r1-alamouti")}
    ok = (slope["l2"] >= slope["jafarkhani"] >= slope["r1-alamouti"]
          and min(at_top, key=at_top.get) == "l2"
          and slope["3d"] > max(slope["sm-4x2"], slope["r2-alamouti"]))
    detail = ", ".join(f"{n} {s:.2f}" for n, s in slope.items())
    detail += f"; BER at {top:g} dB: " + ", ".join(f"{n} {b:.2e}" for n, b in at_top.items())
    report(4, ok, "slopes (decades per 10 dB) " + detail)


# 5. power imbalance

def test_criterion_5_power_imbalance(report):
    snr, imb = 8.0, 20.0
    ber = {}
    for name, con in (("3d", "qpsk"), ("sm-4x2", "qpsk"), ("l2", "16qam"), ("jafarkhani", "16qam"), ("r1-alamouti", "16qam")):
        ber[name] = run_ber_point(BerExperiment(name, con, min_bit_errors=20_000), snr, imb).ber
    rate_one = min(ber["l2"], ber["jafarkhani"], ber["r1-alamouti"])
    ordered = ber["3d"] < ber["sm-4x2"] < rate_one

    r2 = BerExperiment("r2-alamouti", "qpsk", min_bit_errors=1000)
    r2_snr = 14.0
    bal, unbal = run_ber_point(r2, r2_snr, 0.0).ber, run_ber_point(r2, r2_snr, imb).ber
    detail = (f"at {snr:g} dB, {imb:g} dB imbalance: " + ", ".join(f"{n} {b:.3e}" for n, b in ber.items())
              + f"; r2-alamouti at {r2_snr:g} dB: {unbal:.2e} / {bal:.2e} = {unbal / bal:.0f}x")
    report(5, ordered and unbal >= 10 * bal, detail)


# 6. analytic BER curves

def rayleigh_bpsk(gamma):
    return 0.5 * (1 - np.sqrt(gamma / (1 + gamma)))


def rayleigh_mrc2(gamma):
    mu = np.sqrt(gamma / (1 + gamma))
    return ((1 - mu) / 2) ** 2 * (2 + mu)


def test_criterion_6_analytic_ber(report):
    worst_siso = worst_mrc = worst_shift = 0.0
    siso = BerExperiment("siso-sfn", "qpsk", min_bit_errors=5000)
    for snr in np.arange(0.0, 28.0, 3.0):
        ref = rayleigh_bpsk(10 ** (snr / 10) / 2)
        if ref >= 1e-3:
            worst_siso = max(worst_siso, abs(run_ber_point(siso, snr).ber / ref - 1))
    mrc = BerExperiment("simo-mrc", "qpsk", min_bit_errors=5000)
    for snr in np.arange(0.0, 16.0, 2.0):
        ref = rayleigh_mrc2(10 ** (snr / 10) / 2)
        if ref >= 1e-3:
            worst_mrc = max(worst_mrc, abs(run_ber_point(mrc, snr).ber / ref - 1))
    ala = BerExperiment("miso-alamouti", "qpsk", min_bit_errors=20_000)
    for snr in np.arange(0.0, 18.0, 2.0):
        ber = run_ber_point(ala, snr).ber
        if ber >= 1e-3:
            gamma = brentq(lambda g: rayleigh_mrc2(g) - ber, 1e-6, 1e6)
            worst_shift = max(worst_shift, abs(10 * np.log10(4 * gamma) - snr))
    ok = worst_siso <= 0.1 and worst_mrc <= 0.1 and worst_shift <= 0.3
    report(6, ok, f"SISO worst rel. error {worst_siso:.3f}, MRC {worst_mrc:.3f}, "
                  f"Alamouti vs offset MRC worst {worst_shift:.3f} dB")


# 7. property suites

def test_criterion_7_properties(report, tmp_path):
    rng = np.random.default_rng(7)
    energies = []
    identity_err = 0.0
    for code in CODES.values():
        basis = code.dispersion_basis()
        energies.append(0.5 * np.sum(np.abs(basis) ** 2) / code.n_slots)
        for _ in range(100):
            h = crandn(rng, code.n_rx, code.n_tx)
            s = crandn(rng, code.n_symbols)
            lhs = effective_real_channel(code, h) @ realvec(s)
            identity_err = max(identity_err, np.max(np.abs(lhs - realvec(h @ code.encode(s)))))
    energy_spread = max(energies) - min(energies)

    parseval_err = 0.0
    for _ in range(20):
        taps = ChannelTaps.rayleigh(2, 4, [0, 3, 11, 20], rng)
        freq = taps_to_freq_response(taps, 64).per_subcarrier
        lhs = np.sum(np.abs(freq) ** 2)
        rhs = 64 * np.sum(np.abs(taps.taps) ** 2)
        parseval_err = max(parseval_err, abs(lhs - rhs) / rhs)

    args = ["--mode", "ber-snr-sweep", "--code", "l2", "--snr", "0:3:9", "--set", "min_bit_errors=100"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    same_csv = (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    ok = energy_spread <= 1e-9 and identity_err <= 1e-10 and parseval_err <= 1e-10 and same_csv
    report(7, ok, f"energy spread {energy_spread:.1e}, effective-channel error {identity_err:.1e}, "
                  f"Parseval error {parseval_err:.1e}, CSV byte-identical {same_csv}")
