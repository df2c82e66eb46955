"""Stream table: bounded live sessions with idle-based LRU eviction.

Opening a stream when the table is full first evicts streams idle beyond
the timeout; if none qualify, the open is refused with CAPACITY.  Streams
touched within the keep-alive window are never evicted.  Operations on one
stream are serialized by its own lock.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .errors import CapacityError, UnknownStreamError
from .model import InferenceState


@dataclass
class StreamEntry:
    stream_id: str
    state: InferenceState
    last_access: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class StreamTable:
    def __init__(
        self,
        max_streams: int = 64,
        idle_timeout_s: float = 300.0,
        clock: Callable[[], float] = time.monotonic,
    ):
        if max_streams < 1:
            raise ValueError("max_streams must be >= 1")
        self.max_streams = max_streams
        self.idle_timeout_s = idle_timeout_s
        self._clock = clock
        self._lock = threading.Lock()
        self._entries: dict[str, StreamEntry] = {}
        self._ids = itertools.count(1)

    @property
    def live_count(self) -> int:
        with self._lock:
            return len(self._entries)

    def _evict_idle_locked(self) -> None:
        now = self._clock()
        idle = [
            entry
            for entry in self._entries.values()
            if now - entry.last_access > self.idle_timeout_s
        ]
        for entry in sorted(idle, key=lambda e: e.last_access):
            if len(self._entries) < self.max_streams:
                break
            del self._entries[entry.stream_id]

    def add(self, state: InferenceState) -> StreamEntry:
        with self._lock:
            if len(self._entries) >= self.max_streams:
                self._evict_idle_locked()
            if len(self._entries) >= self.max_streams:
                raise CapacityError(
                    f"{len(self._entries)} live streams at the configured maximum "
                    f"of {self.max_streams}"
                )
            entry = StreamEntry(
                stream_id=f"s{next(self._ids)}", state=state, last_access=self._clock()
            )
            self._entries[entry.stream_id] = entry
            return entry

    def get(self, stream_id: str) -> StreamEntry:
        with self._lock:
            entry = self._entries.get(stream_id)
            if entry is None:
                raise UnknownStreamError(f"no live stream {stream_id!r} (closed or evicted)")
            entry.last_access = self._clock()
            return entry

    def close(self, stream_id: str) -> bool:
        with self._lock:
            return self._entries.pop(stream_id, None) is not None
