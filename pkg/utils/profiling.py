import contextlib
import logging
import time

logger = logging.getLogger(__name__)

_JUST_TIME_IT_DEPTH = 0


@contextlib.contextmanager
def just_time(what='timer', verbose=True):
    """
    with just_time('training') as t:
        some_expensive_function()
    t['elapsed']  # seconds
    """
    global _JUST_TIME_IT_DEPTH
    depth = _JUST_TIME_IT_DEPTH
    _JUST_TIME_IT_DEPTH += 1
    resu_state = {}
    if verbose:
        logger.info(f'{4 * depth * " "}Entering: {what} ...')
    start_time = time.perf_counter()
    try:
        yield resu_state
    finally:
        _JUST_TIME_IT_DEPTH -= 1
        elapsed = time.perf_counter() - start_time
        resu_state['elapsed'] = elapsed
        if verbose:
            logger.info(f'{4 * depth * " "}... Elapsed {elapsed:.4g}s in: {what}')


class BusyClock:
    """ Accumulates time spent inside `with clock:` blocks. One clock per thread. """

    def __init__(self):
        self.busy_ns = 0
        self.calls = 0
        self._entered_at = 0

    def __enter__(self) -> 'BusyClock':
        self._entered_at = time.perf_counter_ns()
        return self

    def __exit__(self, *exc_info):
        self.busy_ns += time.perf_counter_ns() - self._entered_at
        self.calls += 1
        return False
