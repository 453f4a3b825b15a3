"""Space-time block encoders for two-site (distributed) broadcasting.

Every codeword is laid out as ``antennas x time slots``. For the four-antenna
distributed codes, antennas 0-1 belong to site 0 and antennas 2-3 to site 1.
Encoders accept symbol arrays of shape ``(..., Q)`` and return
``(..., n_tx, n_slots)`` so whole batches can be encoded at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GoldenConstants:
    theta: float = (1 + np.sqrt(5)) / 2
    theta_bar: float = (1 - np.sqrt(5)) / 2
    alpha: complex = 1 + 1j * (1 - (1 + np.sqrt(5)) / 2)
    alpha_bar: complex = 1 + 1j * (1 - (1 - np.sqrt(5)) / 2)
    scale: float = 1 / np.sqrt(5)


GOLDEN = GoldenConstants()


def _stack(rows):
    """Assemble a codeword batch from a nested list of ``(...)`` arrays."""
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _symbols(s, q: int) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.shape[-1] != q:
        raise ValueError(f"expected {q} symbols on the last axis, got {s.shape[-1]}")
    return s


def encode_alamouti(s1, s2) -> np.ndarray:
    """2x2 Alamouti block ``[[s1, -s2*], [s2, s1*]]``."""
    s1 = np.asarray(s1, dtype=complex)
    s2 = np.asarray(s2, dtype=complex)
    return _stack([[s1, -s2.conj()], [s2, s1.conj()]])


def _outer_alamouti(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Arrange two 2x2 blocks as ``[[A, -B*], [B, A*]]``."""
    top = np.concatenate([a, -b.conj()], axis=-1)
    bottom = np.concatenate([b, a.conj()], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def encode_siso_sfn(s) -> np.ndarray:
    s = _symbols(s, 1)
    return _stack([[s[..., 0]], [s[..., 0]]])


def encode_miso_alamouti(s) -> np.ndarray:
    s = _symbols(s, 2)
    return encode_alamouti(s[..., 0], s[..., 1])


def encode_simo(s) -> np.ndarray:
    s = _symbols(s, 1)
    return s[..., None, :]


def encode_jafarkhani(s) -> np.ndarray:
    s = _symbols(s, 4)
    a = encode_alamouti(s[..., 0], s[..., 1])
    b = encode_alamouti(s[..., 2], s[..., 3])
    return _outer_alamouti(a, b)


def encode_l2(s) -> np.ndarray:
    s = _symbols(s, 4)
    s1, s2, s3, s4 = (s[..., k] for k in range(4))
    c = np.conj
    return _stack(
        [
            [s1, 1j * s2, -c(s3), -c(s4)],
            [s2, s1, 1j * c(s4), -c(s3)],
            [s3, 1j * s4, c(s1), c(s2)],
            [s4, s3, -1j * c(s2), c(s1)],
        ]
    )


def encode_r1_alamouti(s) -> np.ndarray:
    s = _symbols(s, 2)
    a = encode_alamouti(s[..., 0], s[..., 1])
    return np.concatenate([a, a], axis=-2)


def golden_block(s) -> np.ndarray:
    """Unscaled 2x2 Golden codeword carrying four symbols."""
    s = _symbols(s, 4)
    g = GOLDEN
    s1, s2, s3, s4 = (s[..., k] for k in range(4))
    return _stack(
        [
            [g.alpha * (s1 + g.theta * s2), g.alpha * (s3 + g.theta * s4)],
            [1j * g.alpha_bar * (s3 + g.theta_bar * s4), g.alpha_bar * (s1 + g.theta_bar * s2)],
        ]
    )


def encode_3d(s) -> np.ndarray:
    """Golden code inside each site, Alamouti across the two sites."""
    s = _symbols(s, 8)
    a = golden_block(s[..., :4])
    b = golden_block(s[..., 4:])
    return GOLDEN.scale * _outer_alamouti(a, b)


def encode_sm(s) -> np.ndarray:
    s = _symbols(s, 2)
    return np.concatenate([s, s], axis=-1)[..., :, None]


def encode_r2_alamouti(s) -> np.ndarray:
    s = _symbols(s, 4)
    a = encode_alamouti(s[..., 0], s[..., 1])
    b = encode_alamouti(s[..., 2], s[..., 3])
    return np.concatenate([a, b], axis=-2)


def encode_mimo_alamouti(s) -> np.ndarray:
    return encode_miso_alamouti(s)


@dataclass(frozen=True)
class STCode:
    """Descriptor of one space-time scheme.

    ``sites[k]`` is the transmission site feeding antenna ``k``. ``scale`` is
    the amplitude factor applied on top of the raw encoder so that, for
    unit-energy symbols, the mean total radiated energy per slot is one.
    """

    name: str
    n_tx: int
    n_rx: int
    n_slots: int
    n_symbols: int
    sites: tuple[int, ...]
    encoder: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.sites) != self.n_tx:
            raise ValueError(f"{self.name}: site map length {len(self.sites)} != n_tx {self.n_tx}")
        basis = self.encoder(np.eye(self.n_symbols, dtype=complex))
        if basis.shape[-2:] != (self.n_tx, self.n_slots):
            raise ValueError(
                f"{self.name}: encoder yields {basis.shape[-2:]}, "
                f"descriptor says {(self.n_tx, self.n_slots)}"
            )
        # E|X|_F^2 = sum_q |X(e_q)|^2 for i.i.d. zero-mean unit-energy symbols
        # (real and imaginary parts each carry half the energy).
        ibasis = self.encoder(1j * np.eye(self.n_symbols))
        energy = 0.5 * (np.sum(np.abs(basis) ** 2) + np.sum(np.abs(ibasis) ** 2))
        object.__setattr__(self, "scale", float(np.sqrt(self.n_slots / energy)))

    @property
    def rate(self) -> float:
        return self.n_symbols / self.n_slots

    @property
    def n_sites(self) -> int:
        return len(set(self.sites))

    def encode(self, s) -> np.ndarray:
        """Power-normalised codeword(s) for symbol array(s) of shape ``(..., Q)``."""
        return self.scale * self.encoder(s)

    def dispersion_basis(self) -> np.ndarray:
        """Real-linear basis: ``encode(s) = sum_k basis[k] * realvec(s)[k]``.

        ``realvec(s)`` stacks the real parts of ``s`` followed by the imaginary
        parts, so the basis has shape ``(2Q, n_tx, n_slots)``.
        """
        eye = np.eye(self.n_symbols, dtype=complex)
        return np.concatenate([self.encode(eye), self.encode(1j * eye)], axis=0)


_TABLE = [
    ("siso-sfn", 2, 1, 1, 1, (0, 1), encode_siso_sfn),
    ("miso-alamouti", 2, 1, 2, 2, (0, 1), encode_miso_alamouti),
    ("simo-mrc", 1, 2, 1, 1, (0,), encode_simo),
    ("mimo-alamouti", 2, 2, 2, 2, (0, 0), encode_mimo_alamouti),
    ("jafarkhani", 4, 2, 4, 4, (0, 0, 1, 1), encode_jafarkhani),
    ("l2", 4, 2, 4, 4, (0, 0, 1, 1), encode_l2),
    ("r1-alamouti", 4, 2, 2, 2, (0, 0, 1, 1), encode_r1_alamouti),
    ("3d", 4, 2, 4, 8, (0, 0, 1, 1), encode_3d),
    ("sm-4x2", 4, 2, 1, 2, (0, 0, 1, 1), encode_sm),
    ("r2-alamouti", 4, 2, 2, 4, (0, 0, 1, 1), encode_r2_alamouti),
]

CODES: dict[str, STCode] = {row[0]: STCode(*row) for row in _TABLE}

RATE_ONE_CODES = ("jafarkhani", "l2", "r1-alamouti")
RATE_TWO_CODES = ("3d", "sm-4x2", "r2-alamouti")
DISTRIBUTED_CODES = RATE_ONE_CODES + RATE_TWO_CODES
CLASSICAL_CODES = ("siso-sfn", "miso-alamouti", "simo-mrc", "mimo-alamouti")


def get_code(name: str) -> STCode:
    try:
        return CODES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown code {name!r}; valid tokens: {', '.join(CODES)}"
        ) from None


def realvec(m) -> np.ndarray:
    """Flatten the trailing two axes and stack real parts over imaginary parts."""
    m = np.asarray(m)
    flat = m.reshape(*m.shape[:-2], -1)
    return np.concatenate([flat.real, flat.imag], axis=-1)


def effective_real_channel(code: STCode, h) -> np.ndarray:
    """Real matrix ``G`` with ``realvec(h @ code.encode(s)) == G @ realvec(s)``.

    ``h`` may carry leading batch axes: ``(..., n_rx, n_tx)`` maps to
    ``(..., 2 * n_rx * n_slots, 2 * Q)``.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != code.n_tx:
        raise ValueError(f"channel has {h.shape[-1]} transmit columns, {code.name} needs {code.n_tx}")
    basis = code.dispersion_basis()
    hx = np.einsum("...rn,knt->...krt", h, basis)
    return np.swapaxes(realvec(hx), -1, -2)


def code_spectral_efficiency(code: STCode | str, constellation_bits: int) -> float:
    """Information bits per channel use: ``(Q / T) * bits_per_symbol``."""
    if isinstance(code, str):
        code = get_code(code)
    if constellation_bits not in (2, 4):
        raise ValueError("constellation_bits must be 2 (QPSK) or 4 (16QAM)")
    return code.rate * constellation_bits
