"""Discrete-event kernel: event calendar, bed resources, free-bed signals
and per-replication random streams.

Time is in hours throughout; day ``d`` spans ``[24 d, 24 (d + 1))``.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import heapq
from collections import deque
from pathlib import Path

import numpy as np

RNG_PURPOSES = ("arrivals", "attributes", "los", "review")


class PastTime(ValueError):
    pass


class Unavailable(RuntimeError):
    pass


class UnknownToken(KeyError):
    pass


class ReleaseOnEmpty(RuntimeError):
    pass


class Event:
    __slots__ = ("time", "seq", "action", "args")

    def __init__(self, time, seq, action, args):
        self.time = time
        self.seq = seq
        self.action = action
        self.args = args

    @property
    def cancelled(self) -> bool:
        return self.action is None

    def __lt__(self, other):
        return (self.time, self.seq) < (other.time, other.seq)


class EventCalendar:
    """Pending events ordered by (time, insertion sequence)."""

    def __init__(self, start: float = 0.0):
        self.now = float(start)
        self._heap: list = []
        self._seq = 0
        self.processed = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, at: float, action, *args) -> Event:
        if at < self.now:
            raise PastTime(f"cannot schedule at t={at!r}, clock is at {self.now!r}")
        ev = Event(at, self._seq, action, args)
        self._seq += 1
        heapq.heappush(self._heap, (at, ev.seq, ev))
        return ev

    def schedule_in(self, delay: float, action, *args) -> Event:
        return self.schedule(self.now + delay, action, *args)

    @staticmethod
    def cancel(handle: Event) -> None:
        handle.action = None
        handle.args = ()

    def run_until(self, t_end: float) -> int:
        """Fire every event with time <= t_end, then set the clock to t_end."""
        if t_end < self.now:
            raise PastTime(f"run_until({t_end!r}) is before the clock ({self.now!r})")
        heap = self._heap
        count = 0
        while heap and heap[0][0] <= t_end:
            at, _, ev = heapq.heappop(heap)
            action = ev.action
            if action is None:
                continue
            self.now = at
            ev.action = None
            action(*ev.args)
            count += 1
        self.now = float(t_end)
        self.processed += count
        return count


class BedResource:
    """A unit's beds: in service, reserved for patients in transit, and a
    FIFO queue of direct (non-ED) admissions waiting for a bed.

    ``on_handoff(item)`` is called when a released bed goes straight to the
    head of the queue; ``on_change(in_service)`` fires whenever the number
    of occupied beds moves.
    """

    __slots__ = ("name", "capacity", "in_service", "reserved", "queue", "_tokens", "_next_token",
                 "on_handoff", "on_change", "commits", "releases")

    def __init__(self, capacity: int, name: str = "", on_handoff=None, on_change=None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.name = name
        self.capacity = capacity
        self.in_service = 0
        self.reserved = 0
        self.queue: deque = deque()
        self._tokens: set = set()
        self._next_token = 0
        self.on_handoff = on_handoff
        self.on_change = on_change
        self.commits = 0
        self.releases = 0

    def available(self) -> int:
        return self.capacity - self.in_service - self.reserved

    def reserve(self) -> int:
        if self.capacity - self.in_service - self.reserved <= 0:
            raise Unavailable(f"no bed available in {self.name or 'resource'}")
        self.reserved += 1
        token = self._next_token
        self._next_token += 1
        self._tokens.add(token)
        return token

    def release_reservation(self, token: int):
        """Give a reserved bed back; returns a freed-bed notification or None."""
        if token not in self._tokens:
            raise UnknownToken(token)
        self._tokens.remove(token)
        self.reserved -= 1
        if self.queue:
            self._seize(self.queue.popleft())
            return None
        return self

    def commit(self, token: int) -> None:
        if token not in self._tokens:
            raise UnknownToken(token)
        self._tokens.remove(token)
        self.reserved -= 1
        self.in_service += 1
        self.commits += 1
        if self.on_change is not None:
            self.on_change(self.in_service)

    def _seize(self, item) -> None:
        self.in_service += 1
        self.commits += 1
        if self.on_change is not None:
            self.on_change(self.in_service)
        if self.on_handoff is not None:
            self.on_handoff(item)

    def seize_or_enqueue(self, item) -> bool:
        """Direct admission: take a bed now if one is free, else join the queue."""
        if not self.queue and self.available() > 0:
            self.in_service += 1
            self.commits += 1
            if self.on_change is not None:
                self.on_change(self.in_service)
            return True
        self.queue.append(item)
        return False

    def release(self):
        """Free one occupied bed.

        The bed passes to the queue head if anyone is queued (no signal is
        due); otherwise the resource itself is returned as the freed-bed
        notification for the caller to broadcast.
        """
        if self.in_service < 1:
            raise ReleaseOnEmpty(f"release on empty {self.name or 'resource'}")
        self.releases += 1
        self.in_service -= 1
        if self.queue:
            self._seize(self.queue.popleft())
            return None
        if self.on_change is not None:
            self.on_change(self.in_service)
        return self

    @property
    def outstanding_tokens(self) -> int:
        return len(self._tokens)


class SignalHub:
    """Broadcast channels keyed by age group.

    Subscribers are kept ordered by ``order_key`` (ties by subscription
    order) and each is woken at most once per broadcast, one after another,
    so a later subscriber sees whatever an earlier one reserved.
    """

    def __init__(self, channels):
        self._subs = {c: [] for c in channels}
        self._seq = 0

    def subscribe(self, channel, callback, order_key=0.0) -> None:
        entry = (order_key, self._seq, callback)
        self._seq += 1
        bisect.insort(self._subs[channel], entry)

    def waiting(self, channel) -> int:
        return len(self._subs[channel])

    def waiters(self, channel) -> list:
        return [cb for _, _, cb in self._subs[channel]]

    def broadcast(self, channel) -> int:
        subs = self._subs[channel]
        if not subs:
            return 0
        self._subs[channel] = []
        for _, _, callback in subs:
            callback()
        return len(subs)


class RngStream:
    """Seeded Philox stream for one (replication, purpose) pair.

    Scalar draws are served from pre-generated blocks; the block layout is
    fixed, so the same seed and the same call sequence give identical values.
    """

    def __init__(self, seed: int, replication: int, purpose: str, block: int = 4096):
        idx = RNG_PURPOSES.index(purpose)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(replication, idx))
        self.generator = np.random.Generator(np.random.Philox(ss))
        self.purpose = purpose
        self._block = block
        self._u: list = []
        self._ui = 0
        self._e: list = []
        self._ei = 0

    def uniform(self) -> float:
        if self._ui >= len(self._u):
            self._u = self.generator.random(self._block).tolist()
            self._ui = 0
        x = self._u[self._ui]
        self._ui += 1
        return x

    def exponential(self, mean: float) -> float:
        if self._ei >= len(self._e):
            self._e = self.generator.standard_exponential(self._block).tolist()
            self._ei = 0
        x = self._e[self._ei]
        self._ei += 1
        return x * mean


def replication_streams(seed: int, replication: int, crn_seed: int | None = None) -> dict:
    """One stream per purpose; with ``crn_seed`` the arrival and attribute
    streams come from that seed instead, so variants share them."""
    out = {}
    for purpose in RNG_PURPOSES:
        s = crn_seed if crn_seed is not None and purpose in ("arrivals", "attributes") else seed
        out[purpose] = RngStream(s, replication, purpose)
    return out


class Tracer:
    """Collects ``time_hours,event_type,entity_id,detail`` rows."""

    HEADER = ("time_hours", "event_type", "entity_id", "detail")

    def __init__(self):
        self.rows: list = []

    def __call__(self, time, event_type, entity_id, detail=""):
        self.rows.append((time, event_type, entity_id, detail))

    def digest(self) -> str:
        h = hashlib.sha256()
        for t, e, i, d in self.rows:
            h.update(f"{t!r},{e},{i},{d}\n".encode())
        return h.hexdigest()

    def write(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for t, e, i, d in self.rows:
                w.writerow([repr(float(t)), e, i, d])
