"""Received communication signal and mutual information."""

import numpy as np
import pytest

from caisac import (
    CarrierComponentConfig,
    DimensionMismatchError,
    InvalidInputError,
    comm_channel,
    default_input_covariance,
    generate_comm_frame,
    mi_ca,
    mi_single_band,
    simulate_comm_rx,
)


def cc(n=8, m=4, fc=3.5e9, df=30e3):
    return CarrierComponentConfig(fc, df, n, m, 0.0, 1)


def random_responses(rng, n, nt, nu):
    return (rng.standard_normal((n, nt, nu)) + 1j * rng.standard_normal((n, nt, nu))) / np.sqrt(2)


class TestSimulateCommRx:
    def test_noiseless_scalar_link(self):
        cfg = cc(n=4, m=3)
        frame = generate_comm_frame(cfg, num_tx=1, num_users=1, rng_seed=0)
        chan = comm_channel(num_paths=1, num_tx=1, num_ue=1, rng_seed=1)
        y = simulate_comm_rx([frame], [chan], 0.0, rng_seed=2)
        h = chan.taps[0, 0, 0]
        expected = (frame.precoded * h).reshape(-1, 1)
        np.testing.assert_allclose(y, expected, rtol=1e-12)

    def test_zero_frames_give_pure_noise(self):
        cfg = cc(n=4, m=3)
        frame = generate_comm_frame(cfg, num_tx=2, num_users=1, rng_seed=0)
        frame.precoded = np.zeros_like(frame.precoded)
        chan = comm_channel(num_paths=2, num_tx=2, num_ue=2, rng_seed=1)
        y = simulate_comm_rx([frame], [chan], 4.0, rng_seed=2)
        assert np.all(np.abs(y) > 0)
        yq = simulate_comm_rx([frame], [chan], 4.0, rng_seed=2)
        np.testing.assert_array_equal(y, yq)

    def test_two_band_superposition(self):
        cfg1 = cc(n=6, m=3, fc=3.5e9, df=30e3)
        cfg2 = CarrierComponentConfig(28e9, 240e3, 6, 3, 0.0, 2)
        f1 = generate_comm_frame(cfg1, num_tx=3, num_users=2, rng_seed=0)
        f2 = generate_comm_frame(cfg2, num_tx=3, num_users=2, rng_seed=1)
        c1 = comm_channel(2, 3, 2, rng_seed=2)
        c2 = comm_channel(2, 3, 2, rng_seed=3)
        both = simulate_comm_rx([f1, f2], [c1, c2], 0.5, rng_seed=7)
        only1 = simulate_comm_rx([f1], [c1], 0.5, rng_seed=7)
        only2 = simulate_comm_rx([f2], [c2], 0.0, rng_seed=7)
        np.testing.assert_allclose(both, only1 + only2, rtol=1e-10, atol=1e-12)

    def test_dimension_mismatch(self):
        cfg = cc(n=4, m=3)
        frame = generate_comm_frame(cfg, num_tx=2, num_users=1, rng_seed=0)
        chan = comm_channel(num_paths=2, num_tx=3, num_ue=2, rng_seed=1)
        with pytest.raises(DimensionMismatchError):
            simulate_comm_rx([frame], [chan], 0.0, rng_seed=2)


class TestMiSingleBand:
    def test_zero_channel_zero_mi(self, rng):
        h = np.zeros((5, 3, 2), dtype=complex)
        r = np.eye(3)
        assert mi_single_band(h, r, 0.7, num_symbols=6) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_shannon(self):
        h = np.array([[[0.8 - 0.3j]]])
        p = 2.5
        sigma2 = 0.6
        mi = mi_single_band(h, np.array([[p]]), sigma2, num_symbols=1)
        expected = np.log2(1 + p * abs(h[0, 0, 0]) ** 2 / sigma2)
        assert mi == pytest.approx(expected, rel=1e-12)

    def test_matches_block_determinant_oracle(self, rng):
        # assemble the whole frame as one block-diagonal determinant
        n, nt, nu, m = 5, 2, 2, 7
        h = random_responses(rng, n, nt, nu)
        r = np.stack([np.eye(nt) * 0.5 for _ in range(n)])
        sigma2 = 0.3
        mi = mi_single_band(h, r, sigma2, num_symbols=m)

        big_h = np.zeros((n * nt, n * nu), dtype=complex)
        big_r = np.zeros((n * nt, n * nt), dtype=complex)
        for i in range(n):
            big_h[i * nt:(i + 1) * nt, i * nu:(i + 1) * nu] = h[i]
            big_r[i * nt:(i + 1) * nt, i * nt:(i + 1) * nt] = r[i]
        inner = np.conj(big_h).T @ big_r @ big_h / sigma2 + np.eye(n * nu)
        expected = m * np.linalg.slogdet(inner)[1] / np.log(2)
        assert mi == pytest.approx(expected, rel=1e-10)

    def test_unitary_rotation_invariance(self, rng):
        n, nt, nu = 4, 3, 2
        h = random_responses(rng, n, nt, nu)
        r = np.stack([np.eye(nt) for _ in range(n)])
        q, _ = np.linalg.qr(rng.standard_normal((nt, nt)) + 1j * rng.standard_normal((nt, nt)))
        h_rot = np.einsum("ts,nsu->ntu", np.conj(q).T, h)
        r_rot = np.einsum("ts,nsv,wv->ntw", np.conj(q).T, r, np.conj(np.conj(q).T))
        mi = mi_single_band(h, r, 0.4, num_symbols=3)
        mi_rot = mi_single_band(h_rot, r_rot, 0.4, num_symbols=3)
        assert mi_rot == pytest.approx(mi, rel=1e-10)

    def test_non_psd_covariance_rejected(self, rng):
        h = random_responses(rng, 3, 2, 2)
        r = np.array([[1.0, 0.0], [0.0, -0.2]])
        with pytest.raises(InvalidInputError):
            mi_single_band(h, r, 0.5, num_symbols=2)

    def test_non_negative(self, rng):
        for seed in range(5):
            local = np.random.default_rng(seed)
            h = random_responses(local, 4, 3, 2)
            assert mi_single_band(h, 0.2 * np.eye(3), 1.3, num_symbols=2) >= 0.0


class TestMiCa:
    def test_zero_second_band_collapses(self, rng):
        h1 = random_responses(rng, 4, 3, 2)
        h2 = np.zeros_like(h1)
        r = np.eye(3) * 0.7
        report = mi_ca([h1, h2], [r, r], 0.5, num_symbols=6)
        single = mi_single_band(h1, r, 0.5, num_symbols=6)
        assert report.mi_bits == pytest.approx(single, rel=1e-12)

    def test_identical_bands_double_gram(self, rng):
        n, nt, nu, m = 4, 3, 2, 5
        h = random_responses(rng, n, nt, nu)
        r = np.eye(nt)
        sigma2 = 0.8
        report = mi_ca([h, h], [r, r], sigma2, num_symbols=m)
        expected = 0.0
        for i in range(n):
            g = np.conj(h[i]).T @ r @ h[i]
            expected += np.linalg.slogdet(np.eye(nu) + 2 * g / sigma2)[1] / np.log(2)
        assert report.mi_bits == pytest.approx(m * expected, rel=1e-10)
        assert report.mi_bits >= max(report.per_band_mi_bits)

    def test_ca_dominates_each_band(self, rng):
        for seed in range(10):
            local = np.random.default_rng(seed)
            h1 = random_responses(local, 3, 2, 2)
            h2 = random_responses(local, 3, 2, 2)
            report = mi_ca([h1, h2], [np.eye(2), np.eye(2)], 0.9, num_symbols=2)
            assert report.mi_bits >= max(report.per_band_mi_bits) - 1e-12

    def test_shape_mismatch_rejected(self, rng):
        h1 = random_responses(rng, 4, 2, 2)
        h2 = random_responses(rng, 5, 2, 2)
        with pytest.raises(DimensionMismatchError):
            mi_ca([h1, h2], [np.eye(2), np.eye(2)], 0.5, num_symbols=2)

    def test_overwhelming_noise_endpoint(self, rng):
        h1 = random_responses(rng, 8, 3, 2)
        h2 = random_responses(rng, 8, 3, 2)
        report = mi_ca([h1, h2], [np.eye(3), np.eye(3)], 1e12, num_symbols=14)
        assert 0.0 <= report.mi_bits <= 0.01


class TestDefaultCovariance:
    def test_trace_is_total_power(self):
        cfg = cc(n=6, m=3)
        frame = generate_comm_frame(cfg, num_tx=4, num_users=2, rng_seed=0)
        r = default_input_covariance(frame, total_power=2.0)
        traces = np.trace(r, axis1=1, axis2=2)
        np.testing.assert_allclose(traces.real, 2.0, rtol=1e-12)
