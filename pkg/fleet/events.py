"""
Priority-queue event loop with integer millisecond time.

Events at the same instant run in the order they were scheduled.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from typing import Callable

logger = logging.getLogger(__name__)

Action = Callable[[], None]


class EventLoop:
    """
    Attributes:
        now (int): Current simulated time, ms.
        processed (int): Events run so far.
    """

    def __init__(self, start_ms: int = 0) -> None:
        self.now = start_ms
        self.processed = 0
        self._queue: list[tuple[int, int, Action]] = []
        self._order = itertools.count()

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(self, at_ms: int, action: Action) -> None:
        if at_ms < self.now:
            raise ValueError(f"cannot schedule at {at_ms}, already at {self.now}")
        heapq.heappush(self._queue, (at_ms, next(self._order), action))

    def schedule_in(self, delay_ms: int, action: Action) -> None:
        self.schedule(self.now + delay_ms, action)

    def run(self, until_ms: int | None = None) -> int:
        """
        Run events in (time, insertion) order.

        Args:
            until_ms (int | None): Stop before the first event later than this;
                the clock then rests at `until_ms`.

        Returns:
            int: Number of events run.
        """
        count = 0
        while self._queue:
            at_ms = self._queue[0][0]
            if until_ms is not None and at_ms > until_ms:
                break
            _, _, action = heapq.heappop(self._queue)
            self.now = at_ms
            action()
            count += 1
        if until_ms is not None:
            self.now = max(self.now, until_ms)
        self.processed += count
        logger.debug("ran %d events, clock at %d", count, self.now)
        return count
