import numpy as np
import pytest

from pxem import _pykernels
from pxem.datasets import load_finney
from pxem.robit import RobitData

try:
    from pxem import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))

@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def finney():
    x, y = load_finney()
    return RobitData(x, y, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20100813)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
