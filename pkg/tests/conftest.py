import numpy as np
import pytest

from scalecal import _kernels_py

BACKENDS = [("python", _kernels_py)]
try:
    from scalecal import _kernels as _kernels_c

    BACKENDS.append(("cython", _kernels_c))
except ImportError:  # extension not built
    pass


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[b[1] for b in BACKENDS], ids=[b[0] for b in BACKENDS])
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        checks = RESULTS[n]
        ok = all(c[1] for c in checks)
        failed = [f"{name}: {detail}" for name, good, detail in checks if not good]
        detail = "; ".join(failed) if failed else "; ".join(f"{name}: {d}" if d else name for name, _, d in checks)
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
