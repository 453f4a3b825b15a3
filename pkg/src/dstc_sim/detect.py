"""Maximum-likelihood detection on the real-valued linear-dispersion model.

A codeword observation is written as ``y = G x + n`` with ``x = realvec(s)``
(real parts of the Q symbols, then imaginary parts). Both detectors return
the complex symbol vector minimising ``|y - G x|^2`` over the constellation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .constellation import Constellation, demap_nearest

DEFAULT_SEARCH_CAP = 10**6
RANK_TOL = 1e-9
REGULARIZATION = 1e-9


class SearchSpaceError(ValueError):
    """Raised when exhaustive ML would enumerate more than the configured cap."""


@dataclass
class DetectionProblem:
    g: np.ndarray
    y: np.ndarray
    constellation: Constellation
    q: int

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.g.ndim != 2 or self.g.shape[1] != 2 * self.q:
            raise ValueError(f"G must have 2*q = {2 * self.q} columns, got shape {self.g.shape}")
        if self.y.shape != (self.g.shape[0],):
            raise ValueError(f"y has shape {self.y.shape}, expected ({self.g.shape[0]},)")


@dataclass
class DetectorStats:
    """Counters accumulated over many sphere-decoder calls."""

    calls: int = 0
    visited_nodes: int = 0
    fallbacks: int = 0
    regularized: int = 0

    def merge(self, other: "DetectorStats") -> None:
        self.calls += other.calls
        self.visited_nodes += other.visited_nodes
        self.fallbacks += other.fallbacks
        self.regularized += other.regularized


@lru_cache(maxsize=16)
def _candidates(constellation: Constellation, q: int) -> np.ndarray:
    """All ``M**q`` symbol vectors in lexicographic index order, as realvecs."""
    m = constellation.size
    idx = np.array(list(itertools.product(range(m), repeat=q)), dtype=np.int64)
    s = constellation.points[idx]
    cand = np.concatenate([s.real, s.imag], axis=1)
    cand.setflags(write=False)
    return cand


def _to_complex(x: np.ndarray, q: int) -> np.ndarray:
    return x[:q] + 1j * x[q:]


def _direct_metric(p: DetectionProblem, cand: np.ndarray) -> np.ndarray:
    resid = p.y[None, :] - cand @ p.g.T
    return np.einsum("ij,ij->i", resid, resid)


def ml_exhaustive(p: DetectionProblem, cap: int = DEFAULT_SEARCH_CAP) -> np.ndarray:
    """Brute-force ML over every constellation vector.

    Exact ties resolve to the lexicographically smallest symbol-index vector.
    Large spaces are scored through a split into leading and trailing symbol
    groups, ``|a_i - b_j|^2`` for all pairs, which still evaluates every
    vector; near-minimal candidates are then rescored by direct residual.
    """
    m, q = p.constellation.size, p.q
    size = m**q
    if size > cap:
        raise SearchSpaceError(
            f"exhaustive search over {m}^{q} = {size} vectors exceeds cap {cap}"
        )
    if size <= 4096:
        cand = _candidates(p.constellation, q)
        return _to_complex(cand[int(np.argmin(_direct_metric(p, cand)))], q)

    lead = q // 2
    c_lead = _candidates(p.constellation, lead)
    c_tail = _candidates(p.constellation, q - lead)
    g = p.g
    # realvec(s) = [re(s_lead), re(s_tail), im(s_lead), im(s_tail)]
    g_lead = np.concatenate([g[:, :lead], g[:, q:q + lead]], axis=1)
    g_tail = np.concatenate([g[:, lead:q], g[:, q + lead:]], axis=1)
    a = p.y[None, :] - c_lead @ g_lead.T
    b = c_tail @ g_tail.T
    metric = (
        np.einsum("ij,ij->i", a, a)[:, None]
        + np.einsum("ij,ij->i", b, b)[None, :]
        - 2.0 * (a @ b.T)
    ).ravel()
    floor = metric.min()
    slack = 1e-9 * (np.abs(floor) + np.einsum("i,i->", p.y, p.y) + 1e-300)
    near = np.flatnonzero(metric <= floor + slack)
    n_tail = m ** (q - lead)
    i, j = np.divmod(near, n_tail)
    cand = _join(c_lead[i], c_tail[j], lead, q - lead)
    return _to_complex(cand[int(np.argmin(_direct_metric(p, cand)))], q)


def _join(lead: np.ndarray, tail: np.ndarray, q1: int, q2: int) -> np.ndarray:
    return np.concatenate([lead[:, :q1], tail[:, :q2], lead[:, q1:], tail[:, q2:]], axis=1)


@njit(cache=True)
def _sorted_qr(g):
    """QR with greedy column ordering (sorted QR decomposition).

    Columns are picked by smallest remaining norm first, so the bottom rows
    of ``R``, which the depth-first search fixes first, carry the largest
    diagonal entries. Returns ``Q^T`` (rows are the orthonormal columns).
    """
    m, n = g.shape
    qt = np.ascontiguousarray(g.T)
    r = np.zeros((n, n))
    perm = np.arange(n)
    norms = np.zeros(n)
    for j in range(n):
        norms[j] = np.dot(qt[j], qt[j])
    for i in range(n):
        k = i
        for j in range(i + 1, n):
            if norms[j] < norms[k]:
                k = j
        if k != i:
            for col in range(m):
                qt[i, col], qt[k, col] = qt[k, col], qt[i, col]
            for row in range(i):
                r[row, i], r[row, k] = r[row, k], r[row, i]
            norms[i], norms[k] = norms[k], norms[i]
            perm[i], perm[k] = perm[k], perm[i]
        rii = np.sqrt(np.dot(qt[i], qt[i]))
        r[i, i] = rii
        if rii > 0:
            qt[i] /= rii
        for j in range(i + 1, n):
            proj = np.dot(qt[i], qt[j])
            r[i, j] = proj
            qt[j] -= proj * qt[i]
            norms[j] -= proj * proj
    return qt, r, perm


@njit(cache=True)
def _enter(k, r, resid_z, x, levels, order, n):
    acc = resid_z[k]
    for j in range(k + 1, n):
        acc -= r[k, j] * x[j]
    c = acc / r[k, k]
    n_lev = levels.shape[0]
    for a in range(n_lev):
        order[k, a] = a
    # insertion sort by distance to the centre (alphabets have <= 4 levels)
    for a in range(1, n_lev):
        cur = order[k, a]
        dc = abs(levels[cur] - c)
        b = a - 1
        while b >= 0 and abs(levels[order[k, b]] - c) > dc:
            order[k, b + 1] = order[k, b]
            b -= 1
        order[k, b + 1] = cur
    return acc


@njit(cache=True)
def _search(r, z, levels):
    """Schnorr-Euchner depth-first search on ``|z - R x|^2`` with radius shrinking.

    The radius starts infinite, so the first leaf is the Babai point.
    """
    n = r.shape[0]
    n_lev = levels.shape[0]
    x = np.zeros(n)
    best_x = np.zeros(n)
    best = np.inf
    dist = np.zeros(n + 1)
    resid = np.zeros(n)
    order = np.zeros((n, n_lev), dtype=np.int64)
    ptr = np.zeros(n, dtype=np.int64)
    visited = 0
    k = n - 1
    resid[k] = _enter(k, r, z, x, levels, order, n)
    while True:
        if ptr[k] < n_lev:
            a = levels[order[k, ptr[k]]]
            ptr[k] += 1
            e = resid[k] - r[k, k] * a
            d = dist[k + 1] + e * e
            visited += 1
            if d >= best:
                # remaining candidates at this level lie farther from the centre
                ptr[k] = n_lev
                continue
            x[k] = a
            if k == 0:
                best = d
                best_x[:] = x
                ptr[0] = n_lev
            else:
                dist[k] = d
                k -= 1
                ptr[k] = 0
                resid[k] = _enter(k, r, z, x, levels, order, n)
        else:
            k += 1
            if k == n:
                break
    return best_x, visited


@njit(cache=True)
def _decode_one(g, y, levels, rank_tol, regularize):
    """Returns ``(x, visited, deficient)``; ``x`` is unusable when deficient and not regularised."""
    n = g.shape[1]
    qt, r, perm = _sorted_qr(g)
    scale = 0.0
    low = np.inf
    for i in range(n):
        d = abs(r[i, i])
        scale = max(scale, d)
        low = min(low, d)
    deficient = scale == 0.0 or low <= rank_tol * scale
    x = np.zeros(n)
    if deficient:
        if not regularize:
            return x, 0, True
        floor = rank_tol * max(scale, 1.0)
        for i in range(n):
            if abs(r[i, i]) <= floor:
                r[i, i] = REGULARIZATION
    z = qt @ y
    best_x, visited = _search(r, z, levels)
    for i in range(n):
        x[perm[i]] = best_x[i]
    return x, visited, deficient


@njit(cache=True)
def _decode_batch(g, y, levels, rank_tol, regularize, x_out, visited_out, deficient_out):
    for b in range(g.shape[0]):
        x, v, d = _decode_one(g[b], y[b], levels, rank_tol, regularize)
        x_out[b] = x
        visited_out[b] = v
        deficient_out[b] = d


def sphere_decode(
    p: DetectionProblem,
    stats: DetectorStats | None = None,
    cap: int = DEFAULT_SEARCH_CAP,
) -> np.ndarray:
    """Exact ML detection by sphere decoding.

    A rank-deficient ``G`` is handed to :func:`ml_exhaustive` when the search
    space fits under ``cap``; otherwise zero diagonal entries of ``R`` are
    floored at a tiny epsilon to keep the enumeration defined.
    """
    out = sphere_decode_batch(p.g[None], p.y[None], p.constellation, p.q, stats, cap)
    return out[0]


def sphere_decode_batch(g, y, constellation: Constellation, q: int,
                        stats: DetectorStats | None = None, cap: int = DEFAULT_SEARCH_CAP) -> np.ndarray:
    """Sphere-decode a stack of problems ``g[b], y[b]``; returns ``(B, q)`` symbols."""
    g = np.ascontiguousarray(g, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if g.ndim != 3 or g.shape[2] != 2 * q or y.shape != g.shape[:2]:
        raise ValueError(f"inconsistent batch shapes G{g.shape}, y{y.shape} for q={q}")
    if stats is None:
        stats = DetectorStats()
    feasible = constellation.size**q <= cap
    batch = g.shape[0]
    x = np.empty((batch, 2 * q))
    visited = np.zeros(batch, dtype=np.int64)
    deficient = np.zeros(batch, dtype=np.bool_)
    levels = np.asarray(constellation.pam_levels, dtype=float)
    _decode_batch(g, y, levels, RANK_TOL, not feasible, x, visited, deficient)
    stats.calls += batch
    stats.visited_nodes += int(visited.sum())
    out = x[:, :q] + 1j * x[:, q:]
    for b in np.flatnonzero(deficient):
        if feasible:
            stats.fallbacks += 1
            out[b] = ml_exhaustive(DetectionProblem(g[b], y[b], constellation, q), cap=cap)
        else:
            stats.regularized += 1
    return out


def mrc_combine(h, y) -> complex:
    """Maximum-ratio combining statistic ``h^H y / |h|^2``."""
    h = np.asarray(h, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    energy = np.vdot(h, h).real
    if energy == 0:
        raise ValueError("MRC needs a nonzero channel vector")
    return np.vdot(h, y) / energy


def hard_demap(symbols, constellation: Constellation) -> np.ndarray:
    """Gray bit labels of the nearest points (ties go to the smaller index)."""
    return demap_nearest(symbols, constellation)
