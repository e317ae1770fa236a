"""
Device firmware: configuration, SD card logs, sampling loop and uploads.
"""

from .config import (
    ConfigProblem,
    ConfigValidationError,
    DeviceConfig,
    load_config,
    parse_params,
    validate_params,
)
from .device import (
    DeviceState,
    InvalidPhaseError,
    LedState,
    NetLed,
    Phase,
    SetupLed,
    boot,
    format_utc,
    led_state,
    press_button,
    tick,
)
from .reading import ChannelReading, Reading, ReadingFormatError
from .sdcard import CACHE_LOG, PARAMS_FILE, PERM_LOG, SdCardError, VirtualSd
from .upload import (
    RideBatch,
    UploadProgress,
    abort_upload,
    group_cache,
    run_upload,
    upload_receive,
    upload_tick,
)

__all__ = [
    'ConfigProblem', 'ConfigValidationError', 'DeviceConfig', 'load_config', 'parse_params',
    'validate_params',
    'DeviceState', 'InvalidPhaseError', 'LedState', 'NetLed', 'Phase', 'SetupLed', 'boot',
    'format_utc', 'led_state', 'press_button', 'tick',
    'ChannelReading', 'Reading', 'ReadingFormatError',
    'CACHE_LOG', 'PARAMS_FILE', 'PERM_LOG', 'SdCardError', 'VirtualSd',
    'RideBatch', 'UploadProgress', 'abort_upload', 'group_cache', 'run_upload',
    'upload_receive', 'upload_tick',
]
