"""Rayleigh MIMO channel realisations, pathloss and the two-site layout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def default_rng(seed=None) -> np.random.Generator:
    """Pass generators through; turn ints/None/SeedSequences into PCG64 generators."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(shape, rng, variance: float = 1.0) -> np.ndarray:
    """i.i.d. circularly-symmetric CN(0, variance) samples."""
    std = np.sqrt(variance / 2)
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_iid_rayleigh(n_r: int, n_t: int, rng, size=None) -> np.ndarray:
    """``n_r x n_t`` matrix of i.i.d. CN(0, 1) gains.

    ``size`` prepends batch axes, e.g. ``size=(1000,)`` gives ``(1000, n_r, n_t)``.
    """
    if n_r < 1 or n_t < 1:
        raise ValueError(f"channel dimensions must be positive, got {n_r}x{n_t}")
    rng = default_rng(rng)
    batch = () if size is None else tuple(np.atleast_1d(size))
    return complex_normal(batch + (n_r, n_t), rng)


@dataclass
class ChannelTaps:
    """Time-domain L-tap MIMO channel: ``taps[l]`` acts at sample ``delays[l]``."""

    taps: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=complex)
        if self.taps.ndim == 2:
            self.taps = self.taps[None]
        self.delays = np.atleast_1d(np.asarray(self.delays, dtype=np.int64))
        if self.taps.ndim != 3:
            raise ValueError(f"taps must be (L, n_r, n_t), got shape {self.taps.shape}")
        if len(self.delays) != len(self.taps):
            raise ValueError(f"{len(self.taps)} taps but {len(self.delays)} delays")
        if len(self.delays) and (self.delays[0] < 0 or np.any(np.diff(self.delays) <= 0)):
            raise ValueError(f"tap delays must be nonnegative and strictly increasing: {self.delays}")

    @property
    def n_r(self) -> int:
        return self.taps.shape[1]

    @property
    def n_t(self) -> int:
        return self.taps.shape[2]

    @classmethod
    def rayleigh(cls, n_r: int, n_t: int, delays, rng, powers=None) -> "ChannelTaps":
        """Independent Rayleigh taps; ``powers`` (default uniform, summing to 1)."""
        delays = np.atleast_1d(delays)
        if powers is None:
            powers = np.full(len(delays), 1.0 / len(delays))
        taps = sample_iid_rayleigh(n_r, n_t, rng, size=len(delays))
        return cls(taps * np.sqrt(np.asarray(powers))[:, None, None], delays)


@dataclass
class FreqResponse:
    per_subcarrier: np.ndarray

    @property
    def n_subcarriers(self) -> int:
        return self.per_subcarrier.shape[0]


def taps_to_freq_response(taps: ChannelTaps, n_fft: int) -> FreqResponse:
    """``H[k] = sum_l H_l exp(-2j pi k delay_l / N)`` for every subcarrier."""
    if len(taps.delays) and taps.delays.max() >= n_fft:
        raise ValueError(f"tap delay {taps.delays.max()} does not fit an FFT of size {n_fft}")
    impulse = np.zeros((n_fft, taps.n_r, taps.n_t), dtype=complex)
    impulse[taps.delays] = taps.taps
    return FreqResponse(np.fft.fft(impulse, axis=0))


@dataclass
class ScenarioGeometry:
    """Two transmission sites on a line and one receiver, distances in km."""

    site_positions: tuple[float, float] = (0.0, 10.0)
    rx_position: float = 5.0
    pathloss_exponent: float = 3.5
    total_power: float = 10e3
    min_distance: float = 0.1

    def __post_init__(self):
        if self.pathloss_exponent <= 0:
            raise ValueError("pathloss exponent must be positive")
        if self.total_power <= 0:
            raise ValueError("total power must be positive")
        if self.min_distance <= 0:
            raise ValueError("min_distance must be positive")

    @property
    def separation(self) -> float:
        return abs(self.site_positions[1] - self.site_positions[0])

    def at(self, rx_position: float) -> "ScenarioGeometry":
        return ScenarioGeometry(
            self.site_positions, rx_position, self.pathloss_exponent, self.total_power, self.min_distance
        )


def pathloss(geometry: ScenarioGeometry, site_index: int) -> float:
    """Power scale ``max(d, d_min) ** -m`` from site ``site_index`` to the receiver."""
    if site_index not in (0, 1):
        raise ValueError(f"site_index must be 0 or 1, got {site_index}")
    d = abs(geometry.rx_position - geometry.site_positions[site_index])
    return max(d, geometry.min_distance) ** (-geometry.pathloss_exponent)


def build_distributed_channel(
    ch1: ChannelTaps, ch2: ChannelTaps, beta: float, extra_delay: int = 0, n_fft: int | None = None
) -> ChannelTaps:
    """Equivalent two-site channel ``[H1, sqrt(beta) H2]`` with site 2 delayed.

    Taps of both sites are merged on a common delay grid; ``beta`` is a power
    ratio, so site-2 amplitudes are scaled by ``sqrt(beta)``.
    """
    if ch1.n_r != ch2.n_r:
        raise ValueError(f"sites disagree on receive antennas: {ch1.n_r} vs {ch2.n_r}")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    d2 = ch2.delays + int(extra_delay)
    if n_fft is not None and len(d2) and d2.max() >= n_fft:
        raise ValueError(f"delayed tap at {d2.max()} does not fit an FFT of size {n_fft}")
    delays = np.union1d(ch1.delays, d2)
    taps = np.zeros((len(delays), ch1.n_r, ch1.n_t + ch2.n_t), dtype=complex)
    taps[np.searchsorted(delays, ch1.delays), :, : ch1.n_t] = ch1.taps
    taps[np.searchsorted(delays, d2), :, ch1.n_t:] = np.sqrt(beta) * ch2.taps
    return ChannelTaps(taps, delays)


@dataclass
class NoiseSpec:
    variance: float

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be nonnegative, got {self.variance}")


def apply_channel(h, x, noise: NoiseSpec | float, rng=None) -> np.ndarray:
    """``Y = H X + W`` with ``W`` i.i.d. CN(0, noise variance); batches broadcast.

    ``h`` may also be a :class:`FreqResponse`, in which case ``x`` carries one
    block per subcarrier on its leading axis.
    """
    if isinstance(h, FreqResponse):
        h = h.per_subcarrier
    h = np.asarray(h, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if h.ndim < 2 or x.ndim < 2:
        raise ValueError("apply_channel expects matrices (use shape (n, 1) for vectors)")
    if h.shape[-1] != x.shape[-2]:
        raise ValueError(f"cannot apply {h.shape[-2:]} channel to {x.shape[-2:]} block")
    var = noise.variance if isinstance(noise, NoiseSpec) else float(noise)
    y = h @ x
    if var > 0:
        y = y + complex_normal(y.shape, default_rng(rng), var)
    return y
