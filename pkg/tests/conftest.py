import numpy as np
import pytest

from lois_vqa import _fallback, kernels


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def backends():
    impls = [pytest.param(_fallback, id="python")]
    if kernels.BACKEND == "compiled":
        impls.append(pytest.param(kernels._impl, id="compiled"))
    return impls


def random_masks(rng, n, h=32, w=32, max_boxes=3):
    """Union-of-rectangles binary masks, varied enough to give every IoU regime."""
    out = np.zeros((n, h, w), dtype=bool)
    for i in range(n):
        for _ in range(rng.integers(1, max_boxes + 1)):
            r0, c0 = rng.integers(0, h), rng.integers(0, w)
            r1, c1 = rng.integers(r0, h + 1), rng.integers(c0, w + 1)
            out[i, r0:r1, c0:c1] = True
    return out


_criteria = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    num, title = marker
    prev = _criteria.get(num, (title, True))
    ok = prev[1] and not report.failed
    _criteria[num] = (title, ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}")
