"""Numerology, CP alignment, and frame generation."""

import numpy as np
import pytest

from caisac import (
    ArrayConfig,
    CarrierComponentConfig,
    CpTooShortError,
    InconsistentConfigError,
    InvalidConfigError,
    OverloadedSpatialLayersError,
    UnsupportedNumerologyError,
    align_cp,
    aligned_low_band,
    band_ratio,
    check_doppler_headroom,
    derive_timing,
    generate_comm_frame,
    generate_sensing_frame,
    steering,
    to_time_domain,
)


def cc(fc, df, n, m, ns, band=0):
    return CarrierComponentConfig(fc, df, n, m, ns, band)


class TestDeriveTiming:
    def test_table2_low_band(self, table2_low):
        t_ofdm, t_cp, t_total = derive_timing(table2_low)
        assert t_ofdm == pytest.approx(33.3333e-6, rel=1e-4)
        assert t_total == pytest.approx(43.9e-6, rel=1e-6)

    def test_table2_high_band(self, table2_high):
        t_ofdm, _, t_total = derive_timing(table2_high)
        assert t_ofdm == pytest.approx(4.1667e-6, rel=1e-4)
        assert t_total == pytest.approx(5.49e-6, rel=1e-3)

    def test_zero_cp(self):
        cfg = cc(1e9, 15e3, 64, 4, 0.0)
        t_ofdm, t_cp, t_total = derive_timing(cfg)
        assert t_cp == 0.0
        assert t_total == t_ofdm

    def test_invalid_config_rejected(self):
        with pytest.raises(InvalidConfigError):
            cc(1e9, -15e3, 64, 4, 0.0)
        with pytest.raises(InvalidConfigError):
            cc(1e9, 15e3, 0, 4, 0.0)

    def test_doppler_headroom_guard(self):
        cfg = cc(1e9, 15e3, 64, 4, 0.0)
        check_doppler_headroom(cfg, 1500.0)
        with pytest.raises(InvalidConfigError):
            check_doppler_headroom(cfg, 1501.0)


class TestBandRatio:
    def test_table2_pair(self, table2_low, table2_high):
        pair = band_ratio(table2_low, table2_high)
        assert pair.q == 8
        assert pair.rho == pytest.approx(0.0, abs=1e-12)

    def test_fractional_carrier_ratio(self):
        low = cc(1e9, 15e3, 64, 4, 10.0)
        high = cc(8.5e9, 120e3, 64, 4, 10.0)
        pair = band_ratio(low, high)
        assert pair.q == 8
        assert pair.rho == pytest.approx(0.5, abs=1e-12)

    def test_non_integer_spacing_ratio_rejected(self):
        low = cc(1e9, 16e3, 64, 4, 10.0)
        high = cc(8.5e9, 132e3, 64, 4, 10.0)  # ratio 8.25
        with pytest.raises(UnsupportedNumerologyError):
            band_ratio(low, high)

    def test_inconsistent_carrier_ratio_rejected(self):
        low = cc(1e9, 15e3, 64, 4, 10.0)
        high = cc(9.2e9, 120e3, 64, 4, 10.0)  # rho = 1.2
        with pytest.raises(InconsistentConfigError):
            band_ratio(low, high)

    def test_scaling_invariance(self):
        low = cc(2e9, 15e3, 64, 4, 10.0)
        high = cc(17e9, 120e3, 64, 4, 10.0)
        pair = band_ratio(low, high)
        scaled = band_ratio(cc(2e9 * 3.7, 15e3, 64, 4, 10.0),
                            cc(17e9 * 3.7, 120e3, 64, 4, 10.0))
        assert scaled.q == pair.q
        assert scaled.rho == pytest.approx(pair.rho, abs=1e-12)


class TestAlignCp:
    def test_zero_rho_collapses(self):
        low = cc(1e9, 15e3, 512, 4, 0.0)
        high = cc(8e9, 120e3, 512, 4, 7.25)
        assert align_cp(low, high) == pytest.approx(7.25, abs=1e-12)

    def test_table2_values(self, table2_low, table2_high):
        ns1 = align_cp(table2_low, table2_high)
        assert ns1 == pytest.approx(162.304, abs=1e-9)
        aligned = aligned_low_band(table2_low, table2_high)
        p1 = aligned.carrier_duration_product
        p2 = table2_high.carrier_duration_product
        assert p1 == pytest.approx(153650.0, rel=1e-9)
        assert abs(p1 - p2) <= 1e-12 * p1

    def test_hand_computed_fractional_case(self):
        # rho = 0.5, Q = 8, N1 = N2 = 64, Ns2 = 8:
        # Ns1 = (1 + 0.5/8) * (64/64) * 8 + 64 * 0.5 / 8 = 8.5 + 4 = 12.5
        low = cc(1e9, 15e3, 64, 4, 0.0)
        high = cc(8.5e9, 120e3, 64, 4, 8.0)
        ns1 = align_cp(low, high)
        assert ns1 == pytest.approx(12.5, abs=1e-12)
        aligned = aligned_low_band(low, high)
        assert abs(aligned.carrier_duration_product - high.carrier_duration_product) \
            <= 1e-12 * aligned.carrier_duration_product

    def test_cp_too_short_for_scene(self, table2_low, table2_high):
        with pytest.raises(CpTooShortError):
            align_cp(table2_low, table2_high, max_delay_s=2e-6)
        align_cp(table2_low, table2_high, max_delay_s=1.2e-6)

    def test_random_numerologies_product_equality(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            q = int(rng.integers(2, 11))
            rho = float(rng.uniform(0.0, 0.999))
            fc1 = float(rng.uniform(0.5e9, 6e9))
            df1 = float(rng.choice([15e3, 30e3, 60e3]))
            n1 = int(rng.choice([64, 128, 256, 512]))
            n2 = int(rng.choice([64, 128, 256, 512]))
            ns2 = float(rng.uniform(0.0, 200.0))
            low = cc(fc1, df1, n1, int(rng.integers(2, 30)), 0.0, 1)
            high = cc(fc1 * (q + rho), df1 * q, n2, int(rng.integers(2, 30)), ns2, 2)
            aligned = aligned_low_band(low, high)
            p1 = aligned.carrier_duration_product
            p2 = high.carrier_duration_product
            assert abs(p1 - p2) <= 1e-12 * p1


class TestCommFrame:
    def test_single_antenna_single_user(self):
        cfg = cc(1e9, 15e3, 8, 4, 0.0)
        frame = generate_comm_frame(cfg, num_tx=1, num_users=1, rng_seed=0)
        # scalar precoder of modulus one: precoded equals symbols up to phase
        np.testing.assert_allclose(np.abs(frame.precoder_blocks), 1.0, atol=1e-12)
        scaled = frame.precoder_blocks[:, 0, 0][:, None] * frame.symbols
        np.testing.assert_allclose(frame.precoded, scaled, atol=1e-12)

    def test_determinism(self):
        cfg = cc(1e9, 15e3, 16, 6, 0.0)
        a = generate_comm_frame(cfg, num_tx=4, num_users=2, rng_seed=99)
        b = generate_comm_frame(cfg, num_tx=4, num_users=2, rng_seed=99)
        np.testing.assert_array_equal(a.symbols, b.symbols)
        np.testing.assert_array_equal(a.precoded, b.precoded)

    def test_unit_power(self):
        # unit-modulus constellation through isometric precoding: exactly unit power
        cfg = cc(1e9, 15e3, 8, 4, 0.0)
        total = 0.0
        frames = 100
        for seed in range(frames):
            frame = generate_comm_frame(cfg, num_tx=4, num_users=2, rng_seed=seed)
            total += np.sum(np.abs(frame.precoded) ** 2)
        mean = total / (frames * cfg.num_subcarriers * cfg.num_symbols * 2)
        assert mean == pytest.approx(1.0, rel=0.05)

    def test_precoder_blocks_orthonormal(self):
        cfg = cc(1e9, 15e3, 12, 3, 0.0)
        frame = generate_comm_frame(cfg, num_tx=6, num_users=3, rng_seed=5)
        for block in frame.precoder_blocks:
            gram = np.conj(block).T @ block
            np.testing.assert_allclose(gram, np.eye(3), atol=1e-12)

    def test_too_many_users(self):
        cfg = cc(1e9, 15e3, 8, 4, 0.0)
        with pytest.raises(OverloadedSpatialLayersError):
            generate_comm_frame(cfg, num_tx=2, num_users=3, rng_seed=0)


class TestSensingFrame:
    def test_constant_modulus(self):
        cfg = cc(1e9, 15e3, 16, 8, 0.0)
        array = ArrayConfig(4, 4, 0.1)
        frame = generate_sensing_frame(cfg, array, rng_seed=3)
        # unit modulus up to one rounding step of exp(j phi)
        assert np.max(np.abs(np.abs(frame.data) - 1.0)) < 5e-16

    def test_default_beamformer_is_identity(self):
        cfg = cc(1e9, 15e3, 4, 2, 0.0)
        array = ArrayConfig(4, 4, 0.1)
        frame = generate_sensing_frame(cfg, array, rng_seed=3)
        np.testing.assert_array_equal(frame.tx_beamformer, np.eye(4))

    def test_steered_beamformer_first_column(self):
        cfg = cc(1e9, 15e3, 4, 2, 0.0)
        array = ArrayConfig(4, 4, 0.5 * cfg.wavelength_m)
        theta = np.deg2rad(30.0)
        frame = generate_sensing_frame(cfg, array, steer_toward_rad=theta, rng_seed=3)
        expected = np.conj(steering(theta, 4, 0.5)) / 2.0
        np.testing.assert_allclose(frame.tx_beamformer[:, 0], expected, atol=1e-12)
        gram = np.conj(frame.tx_beamformer).T @ frame.tx_beamformer
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)

    def test_determinism(self):
        cfg = cc(1e9, 15e3, 16, 8, 0.0)
        array = ArrayConfig(4, 4, 0.1)
        a = generate_sensing_frame(cfg, array, rng_seed=11)
        b = generate_sensing_frame(cfg, array, rng_seed=11)
        np.testing.assert_array_equal(a.data, b.data)


class TestToTimeDomain:
    def test_constant_row_gives_impulse(self):
        cfg = cc(1e9, 15e3, 4, 1, 0.0)
        freq = np.ones((4, 1), dtype=complex)
        time = to_time_domain(freq, cfg)
        np.testing.assert_allclose(time[:, 0], [1, 0, 0, 0], atol=1e-12)

    def test_single_active_subcarrier(self):
        cfg = cc(1e9, 15e3, 4, 1, 0.0)
        freq = np.zeros((4, 1), dtype=complex)
        freq[1, 0] = 1.0
        time = to_time_domain(freq, cfg)
        expected = np.exp(2j * np.pi * np.arange(4) / 4) / 4
        np.testing.assert_allclose(time[:, 0], expected, atol=1e-12)

    def test_cp_equals_tail(self):
        cfg = cc(1e9, 15e3, 16, 3, 4.0)
        rng = np.random.default_rng(0)
        freq = rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3))
        time = to_time_domain(freq, cfg)
        assert time.shape == (20, 3)
        np.testing.assert_array_equal(time[:4], time[-4:])

    def test_round_trip(self):
        cfg = cc(1e9, 15e3, 32, 5, 7.0)
        rng = np.random.default_rng(1)
        freq = rng.standard_normal((2, 32, 5)) + 1j * rng.standard_normal((2, 32, 5))
        time = to_time_domain(freq, cfg)
        recovered = np.fft.fft(time[:, 7:, :], axis=-2)
        np.testing.assert_allclose(recovered, freq, rtol=1e-10, atol=1e-10)
