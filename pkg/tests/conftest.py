import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from scalinglab.testfn import TestFunction

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_packet(rng, d, poly_degree=0, modulated=True):
    center = rng.uniform(-0.5, 0.5, d)
    widths = rng.uniform(0.7, 1.5, d)
    k0 = rng.uniform(-0.8, 0.8, d) if modulated else None
    poly = None
    if poly_degree:
        poly = {tuple(int(x) for x in rng.multinomial(poly_degree, [1 / d] * d)): 0.5, (0,) * d: 1.0}
    amp = complex(rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5))
    return TestFunction.gaussian(center, widths, k0, amp, poly)


def real_packet(rng, d, modulated=True):
    f = random_packet(rng, d, modulated=modulated)
    from scalinglab.testfn import conj

    return (f + conj(f)) * 0.5


@st.composite
def packets(draw, d=None, max_degree=2):
    d = draw(st.sampled_from([2, 3, 4])) if d is None else d
    fl = st.floats(-1.0, 1.0, allow_nan=False)
    center = draw(st.lists(fl, min_size=d, max_size=d))
    widths = draw(st.lists(st.floats(0.5, 2.0), min_size=d, max_size=d))
    k0 = draw(st.lists(fl, min_size=d, max_size=d))
    deg = draw(st.integers(0, max_degree))
    poly = None
    if deg:
        idx = draw(st.lists(st.integers(0, deg), min_size=d, max_size=d))
        poly = {tuple(idx): 1.0, (0,) * d: draw(st.floats(-1, 1))}
    amp = complex(draw(st.floats(0.2, 2.0)), draw(st.floats(-1, 1)))
    return TestFunction.gaussian(center, widths, k0, amp, poly, max_degree=None)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def unit_gaussian4():
    return TestFunction.gaussian([0, 0, 0, 0], [1, 1, 1, 1])


ACCEPTANCE = pytest.StashKey[dict]()


class CriterionReport:
    def __init__(self, store, number, budget):
        self.store, self.number, self.budget = store, number, budget
        self.start = time.perf_counter()

    def __call__(self, ok, detail):
        elapsed = time.perf_counter() - self.start
        in_time = elapsed <= self.budget
        ok = bool(ok) and in_time
        line = f"criterion {self.number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s / {self.budget:.0f}s budget]"
        self.store[self.number] = line
        print(line)
        assert ok, line


@pytest.fixture
def criterion(request):
    """Reporter for one acceptance criterion; the number and time budget come from the ``criterion`` marker."""
    number, budget = request.node.get_closest_marker("criterion").args
    store = request.config.stash.setdefault(ACCEPTANCE, {})
    yield CriterionReport(store, number, budget)
    if number not in store:
        store[number] = f"criterion {number:2d}: FAIL  raised before reporting"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, budget): acceptance criterion and its runtime budget in seconds")


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
