"""Rate-limited, resumable collection of per-user bot scores.

The network side is abstracted behind :class:`ScoreProvider`; any object
with a ``fetch(user_id)`` method works.  Progress is appended to a JSONL
checkpoint one entry at a time, so an interrupted harvest can be resumed
without re-querying completed users.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from collections import deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import CheckpointError, ValidationError
from .ingest import METRIC_NAMES, BotometerMetrics, ScoreStore

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 5
BACKOFF_START = 1.0
BACKOFF_FACTOR = 2.0


class RetryableError(Exception):
    """Transient provider failure (timeout, HTTP 429/5xx)."""


class PermanentError(Exception):
    """Provider cannot score this user (suspended, deleted, private)."""


class ScoreProvider(Protocol):
    def fetch(self, user_id: str) -> BotometerMetrics: ...


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class MockClock:
    """Simulated time; ``sleep`` advances instantly."""

    def __init__(self, start: float = 0.0):
        self.t = float(start)

    def now(self) -> float:
        return self.t

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self.t += seconds


class MappingProvider:
    """Serve scores from an in-memory mapping; unknown users fail permanently."""

    def __init__(self, scores: Mapping[str, BotometerMetrics]):
        self.scores = scores

    def fetch(self, user_id: str) -> BotometerMetrics:
        try:
            return self.scores[user_id]
        except KeyError:
            raise PermanentError(f"no score for {user_id}") from None


class RateLimiter:
    """Space requests ``1/limit`` seconds apart on the supplied clock.

    A second guard keeps at most ``ceil(limit)`` issue times inside any
    1-second window, which holds even after the schedule is re-anchored
    by a slow provider or a backoff pause.
    """

    def __init__(self, limit: float, clock: Clock):
        if not (limit > 0 and math.isfinite(limit)):
            raise ValidationError(f"rate limit must be a positive number, got {limit!r}")
        self.limit = float(limit)
        self.clock = clock
        self.burst = math.ceil(self.limit)
        self._recent: deque[float] = deque(maxlen=self.burst)
        self._anchor: float | None = None
        self._count = 0

    def _wait_until(self, target: float) -> float:
        now = self.clock.now()
        while now < target:
            self.clock.sleep(target - now)
            now = self.clock.now()
        return now

    def acquire(self) -> float:
        """Block until a request may be issued; return the issue time."""
        now = self.clock.now()
        if self._anchor is None:
            self._anchor, self._count = now, 0
        slot = self._anchor + self._count / self.limit
        if slot < now:
            # fell behind (slow provider, backoff): restart the schedule
            self._anchor, self._count, slot = now, 0, now
        if len(self._recent) == self.burst:
            oldest = self._recent[0]
            slot = max(slot, oldest + 1.0)
            while slot - oldest < 1.0:  # rounding in oldest + 1.0
                slot = math.nextafter(slot, math.inf)
        issued = self._wait_until(slot)
        self._count += 1
        self._recent.append(issued)
        return issued


class HarvestCheckpoint:
    """Append-only JSONL log of completed ``(user_id, metrics)`` entries."""

    def __init__(self, path: str | Path, durable: bool = True):
        self.path = Path(path)
        self.durable = durable
        self._entries: dict[str, BotometerMetrics] = {}
        self._fh = None
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        try:
            raw = self.path.read_bytes()
        except OSError as exc:
            raise CheckpointError(f"cannot read checkpoint {self.path}: {exc}") from exc
        complete, _, partial = raw.rpartition(b"\n")
        if partial:
            # a crash mid-append leaves an unterminated line; it never completed
            log.warning("%s: discarding %d bytes of partial entry", self.path, len(partial))
            try:
                with open(self.path, "r+b") as fh:
                    fh.truncate(len(complete) + (1 if complete else 0))
            except OSError as exc:
                raise CheckpointError(f"cannot repair checkpoint {self.path}: {exc}") from exc
        for lineno, line in enumerate(complete.decode("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                metrics = BotometerMetrics.from_values(obj[m] for m in METRIC_NAMES)
                uid = str(obj["user_id"])
            except (ValueError, KeyError, TypeError) as exc:
                raise CheckpointError(f"{self.path}:{lineno}: corrupt entry ({exc})") from exc
            self._entries[uid] = metrics

    @property
    def completed(self) -> frozenset[str]:
        return frozenset(self._entries)

    def entries(self) -> dict[str, BotometerMetrics]:
        return dict(self._entries)

    def append(self, user_id: str, metrics: BotometerMetrics) -> None:
        if user_id in self._entries:
            raise CheckpointError(f"user {user_id!r} already checkpointed")
        line = json.dumps({"user_id": user_id, **dict(zip(METRIC_NAMES, metrics.as_tuple()))})
        try:
            if self._fh is None:
                self._fh = open(self.path, "a", encoding="utf-8", newline="\n")
            self._fh.write(line + "\n")
            self._fh.flush()
            if self.durable:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise CheckpointError(f"cannot append to checkpoint {self.path}: {exc}") from exc
        self._entries[user_id] = metrics

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True)
class Failure:
    user_id: str
    reason: str
    attempts: int


@dataclass
class HarvestResult:
    store: ScoreStore
    failures: list[Failure] = field(default_factory=list)
    requests: int = 0


def harvest_scores(
    user_ids: Iterable[str],
    provider: ScoreProvider,
    limit: float,
    checkpoint: HarvestCheckpoint,
    clock: Clock | None = None,
    max_attempts: int = MAX_ATTEMPTS,
    backoff: float = BACKOFF_START,
    factor: float = BACKOFF_FACTOR,
) -> HarvestResult:
    """Query ``provider`` for every user not yet in ``checkpoint``.

    Every attempt, including retries, passes through the rate limiter.
    A success is appended to the checkpoint before it counts as done.
    Users that fail permanently, or exhaust ``max_attempts`` retryable
    failures, are reported in ``result.failures`` and skipped.
    """
    clock = clock or SystemClock()
    limiter = RateLimiter(limit, clock)
    done = checkpoint.completed
    pending = [uid for uid in dict.fromkeys(user_ids) if uid not in done]
    log.info("harvest: %d pending, %d already checkpointed", len(pending), len(done))

    failures: list[Failure] = []
    requests = 0
    for uid in pending:
        delay = backoff
        for attempt in range(1, max_attempts + 1):
            limiter.acquire()
            requests += 1
            try:
                metrics = provider.fetch(uid)
            except PermanentError as exc:
                failures.append(Failure(uid, str(exc) or "permanent failure", attempt))
                break
            except RetryableError as exc:
                if attempt == max_attempts:
                    failures.append(Failure(uid, f"retries exhausted: {exc}", attempt))
                    break
                clock.sleep(delay)
                delay *= factor
                continue
            if not isinstance(metrics, BotometerMetrics):
                metrics = BotometerMetrics.from_values(metrics)
            checkpoint.append(uid, metrics)
            break

    return HarvestResult(ScoreStore(checkpoint.entries()), failures, requests)
