"""
Gas sensor calibration model (MQ-7 CO channel and friends).
"""

from .curve import (
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

__all__ = [
    'ChannelSpec',
    'SaturatedHigh',
    'SaturatedLow',
    'SensorCurve',
    'SensorRangeError',
    'adc_to_ppm',
    'calibrate_r0',
    'ppm_to_adc',
    'recalibrate_ppm',
    'sample_with_noise',
]
