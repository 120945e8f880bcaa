import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from sofdma.channel import ChannelRealization, synth_frequency
from sofdma.codebook import Codebook
from sofdma.detector import (MULTITON, SINGLETON, ZEROTON, classify, decode_candidate,
                             detect_zeroton, estimate_phase, verify_singleton)
from sofdma.params import derive_simulation_params

complex_vec = st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False,
                                          allow_infinity=False), min_size=1, max_size=16)


@pytest.fixture(scope="module")
def params():
    # K=50 at 0 dB lowest SNR: a_lo^2 = 2 sigma^2
    return derive_simulation_params(50, 2 ** 38, 20, 1.0, math.sqrt(2), math.sqrt(20), C2=2000)


@pytest.fixture(scope="module")
def codebook(params):
    return Codebook(params, public_seed=1)


def complex_noise(rng, var_per_dim, shape):
    s = math.sqrt(var_per_dim)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


class TestZeroton:
    def test_zero_vector(self):
        assert detect_zeroton(np.zeros(6, dtype=complex), 1e-12)

    def test_noiseless_singleton_at_a_lo(self, params, codebook):
        cw = codebook.codeword(11)
        Y = synth_frequency([cw], [ChannelRealization(params.a_lo, 0.0)], params)
        Y_dot = Y[cw.subcarriers[0], params.C0:]
        assert np.vdot(Y_dot, Y_dot).real == pytest.approx(params.a_lo ** 2 * params.C1)
        assert not detect_zeroton(Y_dot, params.eta)

    def test_noise_false_alarm_rate(self, rng):
        C1, B, sigma2, n = 6, 300, 60.0, 20_000
        eta = 2.0
        W = complex_noise(rng, sigma2 / B, (n, C1))
        hits = sum(not detect_zeroton(w, eta) for w in W)
        p = chi2(2 * C1).sf(eta / (sigma2 / B))
        assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)

    @settings(max_examples=100, deadline=None)
    @given(y=complex_vec, c=st.floats(1.0, 100.0), eta=st.floats(1e-6, 1e3))
    def test_scaling_up_keeps_energy_above_threshold(self, y, c, eta):
        y = np.array(y)
        if not detect_zeroton(y, eta):
            assert not detect_zeroton(c * y, eta)


class TestPhase:
    @pytest.mark.parametrize("y, theta", [(1 + 0j, 0.0), (np.exp(1j * np.pi / 4), np.pi / 4),
                                          (-1 + 0j, np.pi), (complex(-1, -0.0), np.pi),
                                          (-2j, -np.pi / 2)])
    def test_examples(self, y, theta):
        assert estimate_phase(y) == pytest.approx(theta)

    def test_zero_raises(self):
        with pytest.raises(ValueError):
            estimate_phase(0j)

    def test_delay_rotation(self, codebook, params):
        cw = codebook.codeword(12)
        b = int(cw.subcarriers[-1])
        tau = params.B * params.T / (4 * b)
        Y = synth_frequency([cw], [ChannelRealization(1.0, tau)], params)
        assert estimate_phase(complex(Y[b, 0])) == pytest.approx(-np.pi / 2)

    @settings(max_examples=200, deadline=None)
    @given(st.complex_numbers(min_magnitude=1e-9, max_magnitude=1e9))
    def test_range(self, y):
        assert -np.pi < estimate_phase(y) <= np.pi


class TestDecodeCandidate:
    def test_noiseless_singleton(self, params, codebook):
        cw = codebook.codeword(2 ** 37 + 123)
        a = 1.3 * np.exp(0.7j)
        Y = synth_frequency([cw], [ChannelRealization(a, 7.25)], params)
        for b in cw.subcarriers:
            theta = estimate_phase(complex(Y[b, 0]))
            assert decode_candidate(Y[b, :params.C0], theta, codebook, int(b)) == (cw.id, 0)

    def test_hash_check_rejects_foreign_subcarrier(self, params, codebook):
        cw = codebook.codeword(99)
        other = next(b for b in range(params.B) if b not in cw.subcarriers)
        assert decode_candidate(cw.g_tilde.astype(complex), 0.0, codebook, other) is None

    def test_hash_check_on_random_ids(self, params, codebook, rng):
        # a decoded id that is unrelated to b passes the hash with probability D/B
        n = 10_000
        b = 17
        ids = rng.integers(0, params.N, n)
        rejected = np.mean([not codebook.contains(int(k), b) for k in ids])
        floor = 1 - params.D / params.B
        assert rejected >= floor - 3 * math.sqrt(floor * (1 - floor) / n)

    @staticmethod
    def mixture(params, codebook, rng, n_dev):
        ids = rng.choice(params.N, n_dev, replace=False)
        cws = [codebook.codeword(int(k)) for k in ids]
        mags = rng.uniform(params.a_lo, params.a_hi, n_dev)
        Y_b = sum(m * np.exp(2j * np.pi * rng.uniform()) * cw.g for m, cw in zip(mags, cws))
        return ids, int(cws[0].subcarriers[0]), Y_b

    def test_two_device_multitons_rarely_pass(self, params, codebook, rng):
        # noiseless two-device mixtures decode to the dominant device, so the
        # signature check is what rejects them
        trials, singletons = 2000, 0
        for _ in range(trials):
            ids, b, Y_b = self.mixture(params, codebook, rng, 2)
            singletons += classify(Y_b, codebook, b).is_singleton
        assert singletons / trials <= 2.0 ** (1 - params.C1)

    def test_hash_check_on_decoded_collisions(self, params, codebook, rng):
        # three-device mixtures decode to ids unrelated to any of them
        foreign = rejects = 0
        for _ in range(4000):
            ids, b, Y_b = self.mixture(params, codebook, rng, 3)
            theta = estimate_phase(complex(Y_b[0]))
            got = codebook.decode(np.sign((Y_b[1:params.C0] * np.exp(-1j * theta)).real))
            if got is not None and got[0] not in ids:
                foreign += 1
                rejects += not codebook.contains(got[0], b)
        floor = 1 - params.D / params.B
        assert foreign > 500
        assert rejects / foreign >= floor - 3 * math.sqrt(floor * (1 - floor) / foreign)

    def test_pure_noise_rejected(self, params, codebook, rng):
        n = 10_000
        rejects = 0
        for _ in range(n):
            y = complex_noise(rng, 1e-3, params.C0)
            theta = estimate_phase(complex(y[0]))
            rejects += decode_candidate(y, theta, codebook, 5) is None
        assert rejects / n >= 0.99


class TestVerifySingleton:
    def test_exact_signature(self, rng):
        g = rng.choice([-1.0, 1.0], 8)
        ok, A, res = verify_singleton((2 - 1j) * g, g, 0.5)
        assert ok and A == pytest.approx(2 - 1j) and res == pytest.approx(0, abs=1e-24)

    def test_orthogonal_input(self):
        g = np.array([1.0, 1.0, 1.0, 1.0])
        y = np.array([1, -1, 1, -1.0]) * math.sqrt(2 * 0.5 / 4)
        ok, A, res = verify_singleton(y.astype(complex), g, 0.5)
        assert not ok and A == 0 and res == pytest.approx(1.0)

    def test_empty_signature(self):
        with pytest.raises(ValueError):
            verify_singleton(np.zeros(0, dtype=complex), np.zeros(0), 1.0)

    @settings(max_examples=200, deadline=None)
    @given(y=complex_vec, seed=st.integers(0, 2 ** 32 - 1))
    def test_pythagoras(self, y, seed):
        y = np.array(y)
        g = np.random.default_rng(seed).choice([-1.0, 1.0], y.size)
        _, A, res = verify_singleton(y, g, 1.0)
        total = float(np.vdot(y, y).real)
        assert res == pytest.approx(total - y.size * abs(A) ** 2, rel=1e-10,
                                    abs=1e-10 * max(total, 1e-300))

    def test_true_singleton_acceptance_law(self, params, codebook, rng):
        # residual of a true singleton is noise projected off g: scaled chi-square
        cw = codebook.codeword(5)
        var = params.sigma2 / params.B
        n = 10_000
        W = complex_noise(rng, var, (n, params.C1))
        A = params.a_lo * np.exp(2j * np.pi * rng.uniform(size=n))
        acc = sum(verify_singleton(A[i] * cw.g_dot + W[i], cw.g_dot, params.eta_verify)[0]
                  for i in range(n))
        p = chi2(2 * (params.C1 - 1)).cdf(params.eta_verify / var)
        assert abs(acc / n - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_false_accept_falls_with_c1(self, rng):
        rates = []
        for C1 in (2, 4, 8, 16):
            n, hits = 4000, 0
            for _ in range(n):
                g1, g2 = rng.choice([-1.0, 1.0], (2, C1))
                a1, a2 = rng.uniform(1, 3.16, 2) * np.exp(2j * np.pi * rng.uniform(size=2))
                hits += verify_singleton(a1 * g1 + a2 * g2, g1, 1.0)[0]
            rates.append(hits / n)
        assert all(x >= y for x, y in zip(rates, rates[1:]))
        assert rates[0] > rates[-1]
        # only exact sign agreement (or negation) leaves no residual
        assert rates[0] == pytest.approx(0.5, abs=0.05)


class TestClassify:
    def test_empty_subcarrier(self, params, codebook):
        v = classify(np.zeros(params.C, dtype=complex), codebook, 0)
        assert v.kind == ZEROTON and not v.is_singleton

    def test_noiseless_singleton_is_exact(self, params, codebook):
        cw = codebook.codeword(31337, 0)
        a, tau = 2.1 * np.exp(-1.1j), 3.7
        Y = synth_frequency([cw], [ChannelRealization(a, tau)], params)
        for b in cw.subcarriers:
            v = classify(Y[b], codebook, int(b))
            A = a * np.exp(-2j * np.pi * b * tau / (params.B * params.T))
            assert v.kind == SINGLETON and (v.id, v.message) == (cw.id, 0)
            assert v.A_dot == pytest.approx(A, abs=1e-12)

    def test_zero_reference_is_multiton(self, params, codebook):
        Y = np.ones(params.C, dtype=complex) * 5
        Y[0] = 0
        assert classify(Y, codebook, 0).kind == MULTITON
