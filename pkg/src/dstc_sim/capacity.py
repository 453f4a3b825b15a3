"""Monte-Carlo ergodic capacities of SFN, single-cell MIMO and distributed MIMO.

Channel entries are i.i.d. across subcarriers, so the per-subcarrier average
folds into the realisation count and flat ``n_r x n_t`` matrices are drawn
directly. ``rho`` is the reference SNR ``P / sigma_n^2`` (per subcarrier).
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .channel import NoiseSpec, ScenarioGeometry, default_rng, pathloss, sample_iid_rayleigh


class Scenario(str, enum.Enum):
    SFN = "sfn"
    MIMO_SINGLE_CELL = "mimo-single-cell"
    MIMO_DISTRIBUTED = "mimo-distributed"


@dataclass
class CapacityConfig:
    n_channel_realizations: int = 20_000
    n_subcarriers_per_realization: int = 1
    power_split: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.n_channel_realizations < 1 or self.n_subcarriers_per_realization < 1:
            raise ValueError("realisation counts must be >= 1")
        split = np.asarray(self.power_split, dtype=float)
        if split.shape != (2,) or np.any(split < 0) or abs(split.sum() - 1) > 1e-12:
            raise ValueError(f"power_split must be two nonnegative shares summing to 1, got {self.power_split}")

    @property
    def n_samples(self) -> int:
        return self.n_channel_realizations * self.n_subcarriers_per_realization


class CapacityEstimate(NamedTuple):
    mean: float
    std_error: float


@dataclass
class CapacityRecord:
    rx_position: float
    scenario: Scenario
    capacity: float
    std_error: float


def _estimate(samples: np.ndarray) -> CapacityEstimate:
    n = samples.size
    err = samples.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return CapacityEstimate(float(samples.mean()), float(err))


def log2det_hermitian(a: np.ndarray) -> np.ndarray:
    """``log2 det`` of Hermitian positive-definite matrices via Cholesky."""
    chol = np.linalg.cholesky(a)
    diag = np.diagonal(chol, axis1=-2, axis2=-1).real
    return 2.0 * np.sum(np.log2(diag), axis=-1)


def log2det_eye_plus(h: np.ndarray, scale) -> np.ndarray:
    """``log2 det(I + scale * h h^H)`` for a batch of channel matrices."""
    h = np.asarray(h, dtype=complex)
    gram = h @ np.conj(np.swapaxes(h, -1, -2))
    eye = np.eye(h.shape[-2])
    return log2det_hermitian(eye + np.asarray(scale)[..., None, None] * gram)


def capacity_sfn(lambda1, lambda2, rho, cfg: CapacityConfig | None = None, rng=None) -> CapacityEstimate:
    """SISO single-frequency network: both sites radiate the same signal."""
    cfg = cfg or CapacityConfig()
    if lambda1 < 0 or lambda2 < 0 or rho <= 0:
        raise ValueError("need lambda >= 0 and rho > 0")
    rng = default_rng(rng)
    h = sample_iid_rayleigh(1, 2, rng, size=cfg.n_samples)[:, 0, :]
    w1, w2 = cfg.power_split
    gain = w1 * lambda1 * np.abs(h[:, 0]) ** 2 + w2 * lambda2 * np.abs(h[:, 1]) ** 2
    return _estimate(np.log2(1.0 + rho * gain))


def capacity_mimo(n_t: int, n_r: int, rho, cfg: CapacityConfig | None = None, rng=None, channels=None) -> CapacityEstimate:
    """Single-cell MIMO with equal power per transmit antenna.

    ``channels`` (shape ``(n, n_r, n_t)``) replaces the random draws, which
    makes deterministic channels testable.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if channels is None:
        cfg = cfg or CapacityConfig()
        channels = sample_iid_rayleigh(n_r, n_t, default_rng(rng), size=cfg.n_samples)
    channels = np.asarray(channels, dtype=complex)
    if channels.ndim == 2:
        channels = channels[None]
    return _estimate(log2det_eye_plus(channels, rho / channels.shape[-1]))


def capacity_distributed(
    n_t_per_site: int, n_r: int, lambda1, lambda2, rho, cfg: CapacityConfig | None = None, rng=None, channels=None
) -> CapacityEstimate:
    """Two sites with ``n_t_per_site`` antennas each, ST-coded jointly.

    Site ``j`` radiates ``power_split[j]`` of the total power, spread evenly
    over its antennas; with the default even split every one of the
    ``2 * n_t_per_site`` antennas gets ``P / (2 n_t)``.
    """
    cfg = cfg or CapacityConfig()
    if lambda1 < 0 or lambda2 < 0 or rho <= 0:
        raise ValueError("need lambda >= 0 and rho > 0")
    if channels is None:
        channels = sample_iid_rayleigh(n_r, 2 * n_t_per_site, default_rng(rng), size=cfg.n_samples)
    channels = np.asarray(channels, dtype=complex)
    amp = _site_amplitudes(n_t_per_site, lambda1, lambda2, cfg.power_split)
    return _estimate(log2det_eye_plus(channels * amp, rho / n_t_per_site))


def _site_amplitudes(n_t_per_site, lambda1, lambda2, split) -> np.ndarray:
    per_site = np.sqrt([split[0] * lambda1, split[1] * lambda2])
    return np.repeat(per_site, n_t_per_site)


def distributed_block_form(h1: np.ndarray, h2: np.ndarray, lambda1, lambda2, rho, split=(0.5, 0.5)) -> np.ndarray:
    """Distributed-MIMO mutual information from the per-site block structure.

    Evaluates ``log2 det(I + D^(1/2) H^H H D^(1/2))`` with ``H = [H1 H2]`` and
    ``D`` the block-diagonal per-site power matrix, i.e. the transmit-side
    determinant whose blocks are ``lambda_i H_i^H H_j``. By Sylvester's
    identity it equals the receive-side concatenated form.
    """
    n_t = h1.shape[-1]
    c = rho / n_t
    g11 = c * split[0] * lambda1 * (np.conj(np.swapaxes(h1, -1, -2)) @ h1)
    g22 = c * split[1] * lambda2 * (np.conj(np.swapaxes(h2, -1, -2)) @ h2)
    g12 = c * np.sqrt(split[0] * lambda1 * split[1] * lambda2) * (np.conj(np.swapaxes(h1, -1, -2)) @ h2)
    top = np.concatenate([g11, g12], axis=-1)
    bottom = np.concatenate([np.conj(np.swapaxes(g12, -1, -2)), g22], axis=-1)
    block = np.concatenate([top, bottom], axis=-2)
    return log2det_hermitian(np.eye(2 * n_t) + block)


def scenario_capacity(scenario: Scenario | str, geometry: ScenarioGeometry, noise: NoiseSpec, cfg: CapacityConfig, rng) -> CapacityEstimate:
    """Capacity at ``geometry.rx_position`` for one broadcast scenario.

    SFN uses one antenna per site and one receive antenna; both MIMO cases
    use two receive antennas. Single-cell MIMO places the full power on two
    antennas at site 0.
    """
    scenario = Scenario(scenario)
    rho = geometry.total_power / noise.variance
    lam1 = pathloss(geometry, 0)
    lam2 = pathloss(geometry, 1)
    if scenario is Scenario.SFN:
        return capacity_sfn(lam1, lam2, rho, cfg, rng)
    if scenario is Scenario.MIMO_SINGLE_CELL:
        return capacity_mimo(2, 2, rho * lam1, cfg, rng)
    return capacity_distributed(2, 2, lam1, lam2, rho, cfg, rng)


def position_seed(seed: int, position_km: float) -> np.random.SeedSequence:
    """Stream for one receiver position, keyed by the position value."""
    key = zlib.crc32(f"{position_km:.9g}".encode())
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key])


def coverage_sweep(
    geometry: ScenarioGeometry,
    scenario: Scenario | str,
    noise: NoiseSpec,
    cfg: CapacityConfig,
    positions,
    seed: int = 42,
) -> list[CapacityRecord]:
    """Capacity at each receiver position along the line between the sites.

    Every position draws from its own stream derived from ``(seed, position)``,
    so a row can be regenerated without the rest of the grid.
    """
    scenario = Scenario(scenario)
    lo, hi = sorted(geometry.site_positions)
    out = []
    for x in positions:
        if not lo <= x <= hi:
            raise ValueError(f"position {x} km lies outside the sites [{lo}, {hi}]")
        est = scenario_capacity(scenario, geometry.at(x), noise, cfg, default_rng(position_seed(seed, x)))
        out.append(CapacityRecord(float(x), scenario, est.mean, est.std_error))
    return out


def calibrate_noise_variance(
    geometry: ScenarioGeometry,
    cfg: CapacityConfig,
    target: float = 1.5,
    position: float | None = None,
    seed: int = 42,
) -> float:
    """Noise variance at which the SFN capacity at ``position`` equals ``target``.

    Defaults to the midpoint between the sites, where SFN capacity is lowest.
    Common random numbers make the Monte-Carlo objective smooth in the noise
    level, so a bracketing root finder converges cleanly.
    """
    if position is None:
        position = 0.5 * sum(geometry.site_positions)
    geo = geometry.at(position)

    def gap(log_var):
        noise = NoiseSpec(float(np.exp(log_var)))
        est = scenario_capacity(Scenario.SFN, geo, noise, cfg, default_rng(seed))
        return est.mean - target

    lo, hi = np.log(geometry.total_power) - 60.0, np.log(geometry.total_power) + 60.0
    return float(np.exp(brentq(gap, lo, hi, xtol=1e-10)))
