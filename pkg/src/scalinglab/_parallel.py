"""Order-preserving parallel map used for lambda grids and probe sets.

Results are collected in input order and every reduction downstream runs
sequentially over that order, so outputs do not depend on the thread count.
"""

import contextlib
import contextvars
from concurrent.futures import ThreadPoolExecutor

_threads = contextvars.ContextVar("scalinglab_threads", default=1)


def get_threads():
    return _threads.get()


@contextlib.contextmanager
def threads(n):
    token = _threads.set(max(1, int(n)))
    try:
        yield
    finally:
        _threads.reset(token)


def pmap(fn, items):
    items = list(items)
    n = _threads.get()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    ctx = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=n) as pool:
        # nested pmap calls run serially inside workers
        return list(pool.map(lambda x: ctx.copy().run(_serial_call, fn, x), items))


def _serial_call(fn, x):
    token = _threads.set(1)
    try:
        return fn(x)
    finally:
        _threads.reset(token)
