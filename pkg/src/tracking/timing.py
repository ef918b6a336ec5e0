"""High-resolution per-stage wall-clock accumulation."""

import threading
import time
from collections.abc import Iterator
from contextlib import contextmanager

STAGES = ("ingest", "embed", "associate", "update", "write")


class StageTimer:
    """Accumulates seconds per named stage; safe to share across threads."""

    def __init__(self) -> None:
        self.totals: dict[str, float] = dict.fromkeys(STAGES, 0.0)
        self._lock = threading.Lock()

    @contextmanager
    def measure(self, stage: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            with self._lock:
                self.totals[stage] = self.totals.get(stage, 0.0) + elapsed

    def add(self, stage: str, seconds: float) -> None:
        with self._lock:
            self.totals[stage] = self.totals.get(stage, 0.0) + seconds

    def total(self) -> float:
        return sum(self.totals.values())
