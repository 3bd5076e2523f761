"""In-process stand-in for a message-broker unit fed from a scripted stream.

The feed behaves like a single queue with several consumers: every message
is delivered to at most one consumer.  A consumer holds up to
``prefetch_count`` unacknowledged messages; emitting a message acknowledges
it together with every older message the consumer holds.  Terminating a
consumer requeues whatever it still holds.
"""

from __future__ import annotations

import copy
import csv
from typing import Iterable, Optional

from .base import OUTPUT, PARAMETER, ModelDescription, SimulationUnit, UnitError, Variable

TIME_EPS = 1e-9

_ACKED = object()


class SharedFeed:
    def __init__(self, messages: Iterable[tuple] = ()):
        self.messages = [(float(ts), float(v)) for ts, v in messages]
        for (a, _), (b, _) in zip(self.messages, self.messages[1:]):
            if not b > a:
                raise ValueError(f"feed timestamps must be strictly increasing ({a} then {b})")
        self.owner = [None] * len(self.messages)  # None = free, str = holder, _ACKED
        self.delivered = []  # (consumer, index), for the never-twice property

    @classmethod
    def from_csv(cls, path) -> "SharedFeed":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls((float(r["timestamp"]), float(r["value"])) for r in rows)

    def copy(self) -> "SharedFeed":
        return copy.deepcopy(self)

    def free(self) -> list[int]:
        return [i for i, o in enumerate(self.owner) if o is None]

    def claim_next(self, consumer: str, n: int) -> list[int]:
        got = self.free()[:max(0, n)]
        for i in got:
            self.owner[i] = consumer
        return got

    def claim_until(self, consumer: str, t: float) -> list[int]:
        got = [i for i in self.free() if self.messages[i][0] <= t + TIME_EPS]
        for i in got:
            self.owner[i] = consumer
        return got

    def held(self, consumer: str) -> list[int]:
        return [i for i, o in enumerate(self.owner) if o == consumer]

    def ack(self, consumer: str, index: int) -> None:
        # acknowledge index and every older message this consumer holds
        for i in self.held(consumer):
            if i <= index:
                self.owner[i] = _ACKED
        self.delivered.append((consumer, index))

    def requeue(self, consumer: str) -> None:
        for i in self.held(consumer):
            self.owner[i] = None

    @property
    def cursor(self) -> Optional[int]:
        free = self.free()
        return free[0] if free else None


class Broker(SimulationUnit):
    description = ModelDescription(
        "rmqfmu",
        (
            Variable("angle", "real", OUTPUT, 0.0, direct_feedthrough=False),
            Variable("valid", "boolean", OUTPUT, False, direct_feedthrough=False),
            Variable("timestamp", "real", OUTPUT, 0.0, direct_feedthrough=False),
            Variable("clock", "real", OUTPUT, 0.0, direct_feedthrough=False),
            Variable("maxage", "real", PARAMETER, 1.0),
            Variable("prefetch_count", "integer", PARAMETER, 0),
        ),
    )

    def __init__(self, instance_name, feed: SharedFeed):
        super().__init__(instance_name)
        self.feed = feed
        # a consumer id unique within the feed, so two instances with the
        # same name (sandbox + live) never share messages
        self.consumer = f"{instance_name}#{id(self)}"
        self.origin = 0.0
        self.steps = 0
        self.emitted = []  # feed indices in emission order

    def _check(self):
        if self["prefetch_count"] < 0:
            raise UnitError(f"{self.name}: prefetch_count must be >= 0")
        if self["maxage"] < 0:
            raise UnitError(f"{self.name}: maxage must be >= 0")

    def _start(self):
        self.feed.claim_next(self.consumer, max(1, self["prefetch_count"]))
        held = self.feed.held(self.consumer)
        if not held:
            raise UnitError(f"{self.name}: feed exhausted")
        ts, value = self.feed.messages[held[0]]
        self.origin = ts
        self.values.update(angle=value, timestamp=ts, clock=ts, valid=True)

    def _step(self, dt):
        clock = self["clock"]
        self.feed.claim_until(self.consumer, clock)
        due = [i for i in self.feed.held(self.consumer) if self.feed.messages[i][0] <= clock + TIME_EPS]
        if due:
            newest = due[-1]
            self.feed.ack(self.consumer, newest)
            self.emitted.append(newest)
            ts, value = self.feed.messages[newest]
            self.values.update(angle=value, timestamp=ts)
        missing = self["prefetch_count"] - len(self.feed.held(self.consumer))
        if missing > 0:
            self.feed.claim_next(self.consumer, missing)
        self.values["valid"] = clock - self["timestamp"] <= self["maxage"] + TIME_EPS
        self.steps += 1
        # origin + n*dt rather than repeated addition keeps the clock on the feed grid
        self.values["clock"] = self.origin + self.steps * dt

    def _stop(self):
        self.feed.requeue(self.consumer)

    def snapshot(self):
        snap = super().snapshot()
        snap.update(
            queue=[self.feed.messages[i] for i in self.feed.held(self.consumer)],
            cursor=self.feed.cursor,
            emitted=[self.feed.messages[i] for i in self.emitted],
        )
        return snap
