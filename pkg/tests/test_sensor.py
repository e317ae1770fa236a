"""
Unit tests for the MQ-7 sensor curve.
"""

import pytest  # type: ignore
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sensor import (
    ChannelSpec,
    SaturatedHigh,
    SaturatedLow,
    SensorCurve,
    SensorRangeError,
    adc_to_ppm,
    calibrate_r0,
    ppm_to_adc,
    recalibrate_ppm,
    sample_with_noise,
)


class TestAdcToPpm:
    """Test the counts to concentration conversion."""

    def test_midscale_gives_a(self) -> None:
        """Test Rs == R0 at exactly half scale returns the curve constant."""
        curve = SensorCurve(adc_max=1024)
        assert adc_to_ppm(512, curve) == 99.0

    def test_default_curve_midscale(self) -> None:
        """Test 512 counts on a 10-bit ADC."""
        expected = 99.0 * (511 / 512) ** -1.5
        assert adc_to_ppm(512, SensorCurve()) == pytest.approx(expected, rel=1e-12)
        assert adc_to_ppm(512, SensorCurve()) == pytest.approx(99.2907, abs=1e-3)

    def test_more_counts_means_more_gas(self) -> None:
        """Test the conversion is increasing in counts."""
        curve = SensorCurve()
        values = [adc_to_ppm(c, curve) for c in (10, 200, 512, 900, 1020)]
        assert values == sorted(values)

    def test_zero_counts_saturates_low(self) -> None:
        """Test zero counts raises SaturatedLow."""
        with pytest.raises(SaturatedLow):  # type: ignore
            adc_to_ppm(0, SensorCurve())

    def test_full_scale_saturates_high(self) -> None:
        """Test full scale raises SaturatedHigh."""
        with pytest.raises(SaturatedHigh):  # type: ignore
            adc_to_ppm(1023, SensorCurve())

    def test_out_of_range_counts(self) -> None:
        """Test counts beyond the ADC range are rejected."""
        with pytest.raises(SensorRangeError):  # type: ignore
            adc_to_ppm(2000, SensorCurve())


class TestPpmToAdc:
    """Test the inverse conversion used by the simulator."""

    def test_inverse_of_adc_to_ppm(self) -> None:
        """Test counts survive a trip through ppm."""
        curve = SensorCurve(adc_max=4095)
        for counts in (1, 17, 2048, 4094):
            assert ppm_to_adc(adc_to_ppm(counts, curve), curve) == counts

    def test_round_trip_within_one_percent(self) -> None:
        """Test ppm over four decades around a survives a trip through 12-bit counts."""
        curve = SensorCurve(adc_max=4095)
        for ppm in np.geomspace(curve.a / 100, curve.a * 100, 400):
            back = adc_to_ppm(ppm_to_adc(float(ppm), curve), curve)
            assert abs(back - ppm) <= 0.01 * ppm

    def test_monotone_on_random_pairs(self) -> None:
        """Test more counts always read as more gas on 10,000 random pairs."""
        curve = SensorCurve()
        rng = np.random.default_rng(42)
        pairs = rng.integers(1, curve.adc_max, size=(10_000, 2))
        for first, second in pairs:
            low, high = sorted((int(first), int(second)))
            if low == high:
                continue
            assert adc_to_ppm(low, curve) < adc_to_ppm(high, curve)

    def test_clamped_into_open_interval(self) -> None:
        """Test extreme concentrations still give convertible counts."""
        curve = SensorCurve()
        assert ppm_to_adc(1e-9, curve) == 1
        assert ppm_to_adc(1e12, curve) == curve.adc_max - 1

    def test_non_positive_ppm_rejected(self) -> None:
        """Test zero ppm has no counts."""
        with pytest.raises(ValueError):  # type: ignore
            ppm_to_adc(0.0, SensorCurve())


class TestNoiseAndCalibration:
    """Test noisy sampling and R0 calibration."""

    def test_zero_noise_is_exact(self) -> None:
        """Test noise_sd 0 returns the noiseless counts."""
        curve = SensorCurve()
        rng = np.random.default_rng(0)
        assert sample_with_noise(20.0, curve, 0.0, rng) == ppm_to_adc(20.0, curve)

    def test_noise_is_seeded(self) -> None:
        """Test equal seeds give equal noisy samples."""
        curve = SensorCurve()
        a = [sample_with_noise(20.0, curve, 3.0, np.random.default_rng(7)) for _ in range(3)]
        b = [sample_with_noise(20.0, curve, 3.0, np.random.default_rng(7)) for _ in range(3)]
        assert a == b

    def test_noise_stays_in_range(self) -> None:
        """Test heavy noise never produces saturated counts."""
        curve = SensorCurve()
        rng = np.random.default_rng(1)
        samples = [sample_with_noise(1e6, curve, 50.0, rng) for _ in range(200)]
        assert all(1 <= s <= curve.adc_max - 1 for s in samples)

    def test_noise_is_unbiased(self) -> None:
        """Test the mean of 10,000 noisy samples sits on the noiseless counts."""
        curve = SensorCurve()
        rng = np.random.default_rng(3)
        expected = ppm_to_adc(99.0, curve)
        samples = [sample_with_noise(99.0, curve, 5.0, rng) for _ in range(10_000)]
        assert abs(float(np.mean(samples)) - expected) <= 3 * 5.0 / np.sqrt(10_000) + 0.05

    def test_negative_noise_rejected(self) -> None:
        """Test a negative standard deviation is rejected."""
        with pytest.raises(ValueError):  # type: ignore
            sample_with_noise(1.0, SensorCurve(), -1.0, np.random.default_rng(0))

    def test_calibrate_r0_reproduces_reference(self) -> None:
        """Test the calibrated curve reads the reference concentration back."""
        curve = SensorCurve()
        calibrated = calibrate_r0(300, 10.0, curve)
        assert calibrated.r0 != curve.r0
        assert adc_to_ppm(300, calibrated) == pytest.approx(10.0)

    def test_recalibrate_marks_saturation(self) -> None:
        """Test saturated stored counts become None."""
        values = recalibrate_ppm([0, 512, 1023], SensorCurve())
        assert values[0] is None and values[2] is None
        assert values[1] == pytest.approx(99.2907, abs=1e-3)


class TestCurveConfig:
    """Test curve and channel construction from configuration."""

    def test_bad_slope_rejected(self) -> None:
        """Test a non-negative slope is rejected."""
        with pytest.raises(ValueError):  # type: ignore
            SensorCurve(b=0.5)

    def test_unknown_key_rejected(self) -> None:
        """Test typos in sensor config are caught."""
        with pytest.raises(ValueError):  # type: ignore
            SensorCurve.from_dict({"r0": 1.0, "gain": 2})

    def test_channel_from_dict(self) -> None:
        """Test a channel with a partial sensor block."""
        channel = ChannelSpec.from_dict(
            {"channel_id": 1, "label": "NO2", "sensor": {"adc_max": 4095}}
        )
        assert channel.channel_id == 1
        assert channel.curve.adc_max == 4095
        assert channel.curve.a == 99.0
        assert ChannelSpec.from_dict(channel.to_dict()) == channel
