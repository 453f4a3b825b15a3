import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstc_sim.constellation import QAM16, QPSK
from dstc_sim.detect import (
    DetectionProblem,
    DetectorStats,
    SearchSpaceError,
    hard_demap,
    ml_exhaustive,
    mrc_combine,
    sphere_decode,
    sphere_decode_batch,
)
from dstc_sim.stc import CODES, effective_real_channel, get_code, realvec

from conftest import crandn


def make_problem(code, con, snr_db, rng, beta=1.0):
    h = crandn(rng, code.n_rx, code.n_tx)
    h[:, np.asarray(code.sites) == 1] *= np.sqrt(beta)
    s = con.points[rng.integers(con.size, size=code.n_symbols)]
    noise = crandn(rng, code.n_rx, code.n_slots) * np.sqrt(10 ** (-snr_db / 10))
    y = h @ code.encode(s) + noise
    return DetectionProblem(effective_real_channel(code, h), realvec(y), con, code.n_symbols), s


def residual(p, s):
    return np.sum((p.y - p.g @ np.concatenate([s.real, s.imag])) ** 2)


class TestExhaustive:
    def test_noiseless_recovery(self, rng):
        for name in CODES:
            code = get_code(name)
            p, s = make_problem(code, QPSK, 300, rng)
            np.testing.assert_allclose(ml_exhaustive(p), s, atol=1e-12)

    def test_zero_channel_returns_first_vector(self):
        p = DetectionProblem(np.zeros((8, 8)), np.ones(8), QAM16, 4)
        np.testing.assert_array_equal(ml_exhaustive(p), np.full(4, QAM16.points[0]))

    def test_split_path_matches_direct(self, rng):
        # 16QAM with four symbols goes through the split metric
        code = get_code("r2-alamouti")
        for _ in range(20):
            p, _ = make_problem(code, QAM16, 5, rng)
            best = ml_exhaustive(p)
            worst_case = min(residual(p, QAM16.points[rng.integers(16, size=4)]) for _ in range(200))
            assert residual(p, best) <= worst_case + 1e-12

    def test_cap(self):
        p = DetectionProblem(np.eye(16), np.zeros(16), QAM16, 8)
        with pytest.raises(SearchSpaceError):
            ml_exhaustive(p)

    def test_alamouti_matches_linear_decoder(self, rng):
        code = get_code("miso-alamouti")
        for _ in range(300):
            h = crandn(rng, 1, 2)
            s = QPSK.points[rng.integers(4, size=2)]
            y = h @ code.encode(s) + 0.7 * crandn(rng, 1, 2)
            p = DetectionProblem(effective_real_channel(code, h), realvec(y), QPSK, 2)
            # classical combiner: r1 = y1, r2 = y2, s1 ~ h1* r1 + h2 r2*, s2 ~ h2* r1 - h1 r2*
            (h1, h2), (r1, r2) = h[0], y[0]
            est = np.array([np.conj(h1) * r1 + h2 * np.conj(r2), np.conj(h2) * r1 - h1 * np.conj(r2)])
            linear = QPSK.points[np.argmin(np.abs(est[:, None] - QPSK.points) ** 2, axis=1)]
            np.testing.assert_allclose(ml_exhaustive(p), linear)


# 16QAM brute force over 8 symbols (4e9 candidates) is out of reach.
BRUTE_FORCE_CASES = [(n, c) for n in CODES for c in (QPSK, QAM16) if c is QPSK or CODES[n].n_symbols <= 4]


class TestSphere:
    @pytest.mark.parametrize("name, con", BRUTE_FORCE_CASES, ids=lambda v: v if isinstance(v, str) else v.name)
    def test_matches_exhaustive(self, name, con, rng):
        code = get_code(name)
        for snr in (0, 10, 20):
            for _ in range(40):
                p, _ = make_problem(code, con, snr, rng)
                np.testing.assert_array_equal(sphere_decode(p), ml_exhaustive(p))

    def test_noiseless_visits_direct_path(self, rng):
        for name, con in [("3d", QPSK), ("l2", QAM16), ("r2-alamouti", QAM16)]:
            code = get_code(name)
            p, s = make_problem(code, con, 400, rng)
            stats = DetectorStats()
            np.testing.assert_allclose(sphere_decode(p, stats), s, atol=1e-12)
            assert stats.visited_nodes <= code.n_symbols * con.size

    def test_3d_16qam_terminates(self, rng):
        code = get_code("3d")
        stats = DetectorStats()
        for _ in range(20):
            p, _ = make_problem(code, QAM16, 15, rng)
            s_hat = sphere_decode(p, stats)
            assert np.all(np.isin(np.round(s_hat, 12), np.round(QAM16.points, 12)))
            spot = min(residual(p, QAM16.points[rng.integers(16, size=8)]) for _ in range(100))
            assert residual(p, s_hat) <= spot
        assert stats.visited_nodes / 20 < 1e-3 * 16**8

    def test_rank_deficient_falls_back(self, rng):
        code = get_code("r2-alamouti")
        p, _ = make_problem(code, QPSK, 10, rng, beta=0.0)
        stats = DetectorStats()
        np.testing.assert_array_equal(sphere_decode(p, stats), ml_exhaustive(p))
        assert stats.fallbacks == 1

    def test_zero_channel(self):
        p = DetectionProblem(np.zeros((4, 4)), np.ones(4), QPSK, 2)
        np.testing.assert_array_equal(sphere_decode(p), ml_exhaustive(p))

    def test_regularised_when_exhaustive_is_infeasible(self, rng):
        code = get_code("r2-alamouti")
        p, _ = make_problem(code, QAM16, 20, rng, beta=0.0)
        stats = DetectorStats()
        s_hat = sphere_decode(p, stats, cap=10)
        assert stats.regularized == 1 and stats.fallbacks == 0
        # site-0 symbols are still observable and must be detected exactly
        np.testing.assert_array_equal(s_hat[:2], ml_exhaustive(p)[:2])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_scale_invariance_and_determinism(self, seed, c):
        rng = np.random.default_rng(seed)
        p, _ = make_problem(get_code("jafarkhani"), QAM16, 8, rng)
        base = sphere_decode(p)
        np.testing.assert_array_equal(base, sphere_decode(p))
        scaled = DetectionProblem(c * p.g, c * p.y, QAM16, 4)
        np.testing.assert_array_equal(sphere_decode(scaled), base)

    def test_batch_matches_single(self, rng):
        code = get_code("l2")
        probs = [make_problem(code, QAM16, 6, rng)[0] for _ in range(10)]
        batch = sphere_decode_batch(np.stack([p.g for p in probs]), np.stack([p.y for p in probs]), QAM16, 4)
        for p, s in zip(probs, batch):
            np.testing.assert_array_equal(sphere_decode(p), s)

    def test_batch_shape_check(self):
        with pytest.raises(ValueError):
            sphere_decode_batch(np.zeros((2, 4, 4)), np.zeros((2, 5)), QPSK, 2)


def test_problem_validation():
    with pytest.raises(ValueError):
        DetectionProblem(np.zeros((4, 3)), np.zeros(4), QPSK, 2)
    with pytest.raises(ValueError):
        DetectionProblem(np.zeros((4, 4)), np.zeros(3), QPSK, 2)


class TestMrc:
    def test_single_branch(self):
        assert mrc_combine([1, 0], [3 + 1j, 7]) == 3 + 1j

    def test_equal_branches(self):
        assert mrc_combine([1, 1], [2j, 2j]) == pytest.approx(2j)

    def test_undoes_channel(self, rng):
        h = crandn(rng, 4)
        assert mrc_combine(h, h * (0.3 - 2j)) == pytest.approx(0.3 - 2j)

    def test_zero_channel(self):
        with pytest.raises(ValueError):
            mrc_combine([0, 0], [1, 1])

    def test_agrees_with_ml_for_simo(self, rng):
        code = get_code("simo-mrc")
        for _ in range(200):
            p, _ = make_problem(code, QAM16, 5, rng)
            h = crandn(rng, 2, 1)
            s = QAM16.points[rng.integers(16, size=1)]
            y = h @ code.encode(s) + 0.5 * crandn(rng, 2, 1)
            p = DetectionProblem(effective_real_channel(code, h), realvec(y), QAM16, 1)
            z = mrc_combine(h[:, 0], y[:, 0])
            np.testing.assert_array_equal(hard_demap([z], QAM16), hard_demap(sphere_decode(p), QAM16))
