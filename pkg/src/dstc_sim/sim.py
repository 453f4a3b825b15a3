"""Monte-Carlo BER engine for space-time coded two-site broadcasting.

SNR convention: ``snr_db`` is the mean received signal energy per receive
antenna per slot over the noise variance, with unit-variance channel taps.
All codes radiate unit total energy per slot, so the convention is the same
for every code and does not depend on the number of transmit antennas.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import default_rng, sample_iid_rayleigh, complex_normal
from .constellation import Constellation, get_constellation, map_bits
from .detect import DetectorStats, hard_demap, sphere_decode_batch
from .stc import STCode, effective_real_channel, get_code, realvec

__all__ = [
    "BerExperiment",
    "BerRecord",
    "map_bits",
    "snr_to_noise_variance",
    "site_amplitudes",
    "run_ber_point",
    "run_snr_sweep",
    "run_imbalance_sweep",
    "required_snr",
    "required_snr_vs_imbalance",
    "diversity_slope",
]


@dataclass
class BerExperiment:
    code: STCode | str
    constellation: Constellation | str = "qpsk"
    snr_grid: tuple[float, ...] = (0.0,)
    imbalance_grid: tuple[float, ...] = (0.0,)
    max_codewords: int = 10**7
    min_bit_errors: int = 400
    seed: int = 42
    batch_size: int = 256

    def __post_init__(self):
        if isinstance(self.code, str):
            self.code = get_code(self.code)
        if isinstance(self.constellation, str):
            self.constellation = get_constellation(self.constellation)
        self.snr_grid = tuple(float(v) for v in np.atleast_1d(self.snr_grid))
        self.imbalance_grid = tuple(float(v) for v in np.atleast_1d(self.imbalance_grid))
        if not self.snr_grid or not self.imbalance_grid:
            raise ValueError("SNR and imbalance grids must be nonempty")
        if self.max_codewords < 1 or self.min_bit_errors < 1 or self.batch_size < 1:
            raise ValueError("max_codewords, min_bit_errors and batch_size must be positive")

    @property
    def bits_per_codeword(self) -> int:
        return self.code.n_symbols * self.constellation.bits_per_symbol


@dataclass
class BerRecord:
    code: str
    constellation: str
    snr_db: float
    imbalance_db: float
    bit_errors: int
    bits_simulated: int
    codewords: int
    sphere_fallbacks: int = 0
    visited_nodes: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_simulated if self.bits_simulated else float("nan")

    @property
    def rel_std_error(self) -> float:
        """Binomial relative standard error of the BER estimate."""
        if self.bit_errors == 0:
            return float("inf")
        p = self.ber
        return float(np.sqrt((1 - p) / (p * self.bits_simulated)))


def received_energy_per_slot(code: STCode) -> float:
    """Mean received signal energy per receive antenna and slot (unit channel)."""
    basis = code.dispersion_basis()
    # E|h^T x|^2 = E|x|^2 for i.i.d. CN(0,1) taps; each real coordinate has energy 1/2
    return float(0.5 * np.sum(np.abs(basis) ** 2) / code.n_slots)


def snr_to_noise_variance(snr_db: float, code: STCode | str | None = None, constellation=None) -> float:
    """Noise variance giving ``snr_db`` at each receive antenna.

    ``constellation`` is accepted for interface symmetry; all alphabets have
    unit mean energy, so it does not change the result.
    """
    energy = 1.0 if code is None else received_energy_per_slot(get_code(code) if isinstance(code, str) else code)
    return energy * 10.0 ** (-snr_db / 10.0)


def site_amplitudes(code: STCode, imbalance_db: float) -> np.ndarray:
    """Per-antenna amplitude weights for a site power ratio of ``imbalance_db``.

    Site 0 is the stronger one. Total received power is renormalised: the two
    site weights ``w0 / w1 = 10**(imbalance/10)`` sum to 1 and are applied on
    top of the even split each code already radiates per site.
    """
    sites = np.asarray(code.sites)
    if code.n_sites == 1:
        return np.ones(code.n_tx)
    ratio = 10.0 ** (imbalance_db / 10.0)
    w = np.array([ratio, 1.0]) / (1.0 + ratio)
    return np.sqrt(2.0 * w[sites])


def point_seed(seed: int, snr_db: float, imbalance_db: float) -> np.random.SeedSequence:
    """Stream for one grid point, keyed by its coordinates rather than position."""
    key = zlib.crc32(f"{snr_db:.9g}/{imbalance_db:.9g}".encode())
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key])


def run_ber_point(exp: BerExperiment, snr_db: float, imbalance_db: float = 0.0, rng=None) -> BerRecord:
    """Simulate codewords until ``min_bit_errors`` or ``max_codewords`` is reached."""
    code, con = exp.code, exp.constellation
    if rng is None:
        rng = point_seed(exp.seed, snr_db, imbalance_db)
    rng = default_rng(rng)
    var = snr_to_noise_variance(snr_db, code, con)
    amp = site_amplitudes(code, imbalance_db)
    n_bits = exp.bits_per_codeword
    stats = DetectorStats()
    errors = 0
    done = 0
    while errors < exp.min_bit_errors and done < exp.max_codewords:
        batch = min(exp.batch_size, exp.max_codewords - done)
        bits = rng.integers(0, 2, size=(batch, n_bits), dtype=np.int8)
        x = code.encode(map_bits(bits, con))
        h = sample_iid_rayleigh(code.n_rx, code.n_tx, rng, size=batch) * amp
        y = h @ x + complex_normal((batch, code.n_rx, code.n_slots), rng, var)
        g = effective_real_channel(code, h)
        yr = realvec(y)
        s_hat = sphere_decode_batch(g, yr, con, code.n_symbols, stats)
        errors += int(np.count_nonzero(hard_demap(s_hat, con) != bits))
        done += batch
    return BerRecord(
        code.name, con.name, float(snr_db), float(imbalance_db), errors, done * n_bits, done,
        stats.fallbacks, stats.visited_nodes,
    )


def _run_task(args):
    exp, snr_db, imb_db = args
    return run_ber_point(exp, snr_db, imb_db)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("DSTC_SIM_WORKERS", "1"))
    return max(1, int(workers))


def _run_grid(exp: BerExperiment, points, workers) -> list[BerRecord]:
    tasks = [(exp, s, i) for s, i in points]
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) == 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def run_snr_sweep(exp: BerExperiment, workers: int | None = 1, imbalance_db: float = 0.0) -> list[BerRecord]:
    """One record per SNR grid point at a fixed (default balanced) imbalance."""
    return _run_grid(exp, [(s, imbalance_db) for s in exp.snr_grid], workers)


def run_imbalance_sweep(exp: BerExperiment, snr_db: float | None = None, workers: int | None = 1,
                        target_ber: float = 1e-3) -> list[BerRecord]:
    """BER versus site power ratio at a fixed SNR.

    Without ``snr_db``, a single-entry ``snr_grid`` is used as is; a longer
    grid is swept at balanced power and the SNR reaching ``target_ber`` is
    interpolated from it.
    """
    if snr_db is None:
        if len(exp.snr_grid) == 1:
            snr_db = exp.snr_grid[0]
        else:
            snr_db = required_snr(run_snr_sweep(exp, workers), target_ber)
            if not np.isfinite(snr_db):
                raise ValueError(f"SNR grid {exp.snr_grid} does not bracket BER {target_ber}")
    return _run_grid(exp, [(snr_db, i) for i in exp.imbalance_grid], workers)


def required_snr(records: list[BerRecord], target_ber: float) -> float:
    """SNR (dB) at which the log-BER curve crosses ``target_ber``.

    Interpolates ``log10 BER`` linearly between the first bracketing pair of
    points; returns NaN when the target is not bracketed.
    """
    pts = sorted((r.snr_db, r.ber) for r in records if r.bit_errors > 0)
    target = np.log10(target_ber)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        l0, l1 = np.log10(b0), np.log10(b1)
        if l0 >= target >= l1 and l0 != l1:
            return float(s0 + (target - l0) * (s1 - s0) / (l1 - l0))
    return float("nan")


def required_snr_vs_imbalance(exp: BerExperiment, target_ber: float = 1e-3, workers: int | None = 1):
    """``[(imbalance_db, required_snr_db), ...]`` from full SNR sweeps per imbalance."""
    out = []
    for imb in exp.imbalance_grid:
        recs = run_snr_sweep(exp, workers, imbalance_db=imb)
        out.append((imb, required_snr(recs, target_ber)))
    return out


def diversity_slope(records: list[BerRecord], ber_min: float = 0.0, ber_max: float = 1.0) -> float:
    """Least-squares decay of ``log10 BER`` per decade of SNR.

    Uses the points whose BER lies in ``[ber_min, ber_max]``; a result of 2
    means the BER falls two decades per 10 dB.
    """
    pts = [(r.snr_db / 10.0, np.log10(r.ber)) for r in records
           if r.bit_errors > 0 and ber_min <= r.ber <= ber_max]
    if len(pts) < 2:
        raise ValueError("need at least two points with errors inside the BER window")
    x, y = np.array(pts).T
    return float(-np.polyfit(x, y, 1)[0])
