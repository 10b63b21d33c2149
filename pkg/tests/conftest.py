import numpy as np
import pytest

from sepspde import _kernels

_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one acceptance line: ``report(n, ok, detail)``."""
    def _add(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _REPORT.append(line)
        print(line)
    return _add


BACKENDS = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def kernels(request):
    """Namespace with the kernel functions of one backend."""
    suffix = "_" + request.param

    class K:
        name = request.param
        quadratic_select = staticmethod(getattr(_kernels, "quadratic_select" + suffix))
        kde_gauss = staticmethod(getattr(_kernels, "kde_gauss" + suffix))
        march = staticmethod(getattr(_kernels, "march" + suffix))
    return K


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
