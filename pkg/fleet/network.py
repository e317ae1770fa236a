"""
Lossy, delayed, order-preserving links between devices and the broker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mqttwire import PacketType

# Frames that can be lost; session setup and teardown always get through.
DROPPABLE_TYPES = frozenset({PacketType.PUBLISH, PacketType.PUBACK})


@dataclass(frozen=True)
class ScheduledFrame:
    frame: bytes
    deliver_at: int


def is_droppable(frame: bytes) -> bool:
    return bool(frame) and (frame[0] >> 4) in DROPPABLE_TYPES


def network_deliver(
    frame: bytes,
    drop_probability: float,
    latency_bounds: tuple[int, int],
    rng: np.random.Generator,
    now: int,
    not_before: int = 0,
) -> ScheduledFrame | None:
    """
    Decide the fate of one frame.

    Args:
        frame (bytes): The frame.
        drop_probability (float): Independent loss probability in [0, 1).
        latency_bounds (tuple[int, int]): Inclusive latency range, ms.
        rng (np.random.Generator): Link generator.
        now (int): Send time, ms.
        not_before (int): Previous delivery time on this link; deliveries never overtake it.

    Returns:
        ScheduledFrame | None: None when dropped.
    """
    if not 0.0 <= drop_probability < 1.0:
        raise ValueError("drop_probability must be in [0, 1)")
    low, high = latency_bounds
    if low < 0 or high < low:
        raise ValueError(f"bad latency bounds {latency_bounds}")
    if rng.random() < drop_probability:
        return None
    latency = int(rng.integers(low, high + 1))
    return ScheduledFrame(frame, max(now + latency, not_before))


class LossyLink:
    """
    One direction of one connection.

    Attributes:
        sent (int): Frames offered.
        dropped (int): Frames lost.
    """

    def __init__(
        self,
        drop_probability: float,
        latency_bounds: tuple[int, int],
        rng: np.random.Generator,
    ) -> None:
        self.drop_probability = drop_probability
        self.latency_bounds = latency_bounds
        self.rng = rng
        self.sent = 0
        self.dropped = 0
        self._last_delivery = 0

    def send(self, frame: bytes, now: int) -> ScheduledFrame | None:
        self.sent += 1
        probability = self.drop_probability if is_droppable(frame) else 0.0
        scheduled = network_deliver(
            frame, probability, self.latency_bounds, self.rng, now, self._last_delivery
        )
        if scheduled is None:
            self.dropped += 1
            return None
        self._last_delivery = scheduled.deliver_at
        return scheduled
