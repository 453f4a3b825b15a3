"""Gray-labelled QPSK and 16QAM alphabets with unit average energy."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True, eq=False)
class Constellation:
    """Square QAM alphabet with per-axis Gray labelling.

    Bits of one symbol are interleaved: even positions drive the in-phase
    axis, odd positions the quadrature axis. On each axis the first bit is
    the sign (0 -> positive) and the second, if any, selects the outer level.
    Point ``k`` carries the label whose MSB-first integer value is ``k``.
    """

    name: str
    bits_per_symbol: int
    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    pam_levels: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.points)

    def map(self, bits) -> np.ndarray:
        return map_bits(bits, self)

    def demap(self, symbols) -> np.ndarray:
        return demap_nearest(symbols, self)


def _axis_level(bits: np.ndarray) -> np.ndarray:
    """Integer PAM level of one axis from its (sign[, magnitude]) bits."""
    sign = 1 - 2 * bits[..., 0]
    if bits.shape[-1] == 1:
        return sign
    return sign * (1 + 2 * bits[..., 1])


def _build(name: str, bits_per_symbol: int) -> Constellation:
    m = 2**bits_per_symbol
    idx = np.arange(m)
    labels = (idx[:, None] >> np.arange(bits_per_symbol - 1, -1, -1)) & 1
    re = _axis_level(labels[:, 0::2])
    im = _axis_level(labels[:, 1::2])
    raw = re + 1j * im
    scale = np.sqrt(np.mean(np.abs(raw) ** 2))
    levels = np.unique(re) / scale
    return Constellation(name, bits_per_symbol, raw / scale, labels.astype(np.int8), levels)


@lru_cache(maxsize=None)
def get_constellation(name: str) -> Constellation:
    """Look up a constellation by token (``"qpsk"`` or ``"16qam"``)."""
    key = name.lower().replace("-", "").replace("_", "")
    if key == "qpsk":
        return _build("qpsk", 2)
    if key in ("16qam", "qam16"):
        return _build("16qam", 4)
    raise ValueError(f"unknown constellation {name!r}; valid: 'qpsk', '16qam'")


QPSK = get_constellation("qpsk")
QAM16 = get_constellation("16qam")


def map_bits(bits, constellation: Constellation) -> np.ndarray:
    """Map a flat bit array (or a batch along the last axis) to symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    k = constellation.bits_per_symbol
    if bits.shape[-1] % k:
        raise ValueError(
            f"bit count {bits.shape[-1]} is not a multiple of {k} ({constellation.name})"
        )
    groups = bits.reshape(*bits.shape[:-1], -1, k)
    index = groups @ (1 << np.arange(k - 1, -1, -1))
    return constellation.points[index]


def nearest_index(symbols, constellation: Constellation) -> np.ndarray:
    """Index of the nearest point; ties resolve to the smaller index."""
    symbols = np.asarray(symbols, dtype=complex)
    dist = np.abs(symbols[..., None] - constellation.points) ** 2
    near = dist <= dist.min(axis=-1, keepdims=True) + 1e-12
    return np.argmax(near, axis=-1)


def demap_nearest(symbols, constellation: Constellation) -> np.ndarray:
    idx = nearest_index(symbols, constellation)
    bits = constellation.labels[idx]
    return bits.reshape(*bits.shape[:-2], -1)
