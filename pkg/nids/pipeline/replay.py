""" Rate-controlled replay of a session stream, the tcpreplay analogue at session level. """
import logging
import time
from typing import Callable, Iterable, Iterator, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')


class TokenBucket:
    """ rate tokens per second, holding at most `burst_s` seconds worth. Starts empty. """

    def __init__(
        self,
        rate: float,
        burst_s: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not rate > 0:
            raise ValueError(f"rate must be > 0, got {rate}")
        self.rate = rate
        self.capacity = max(1.0, rate * burst_s)
        self.clock = clock
        self.sleep = sleep
        self.tokens = 0.0
        self.updated_at = clock()

    def _refill(self):
        now = self.clock()
        self.tokens = min(self.capacity, self.tokens + (now - self.updated_at) * self.rate)
        self.updated_at = now

    def take(self):
        """ Blocks until one token is available. """
        self._refill()
        while self.tokens < 1.0:
            self.sleep((1.0 - self.tokens) / self.rate)
            self._refill()
        self.tokens -= 1.0


def replay(source: Iterable[T], rate_or_none: Optional[float], **bucket_kwargs) -> Iterator[T]:
    """ None means unlimited: items go out as fast as the consumer pulls them. """
    if rate_or_none is None:
        yield from source
        return

    bucket = TokenBucket(rate_or_none, **bucket_kwargs)
    for item in source:
        bucket.take()
        yield item
