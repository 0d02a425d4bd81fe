import pytest

from reluctance_estimation import _backend
from reluctance_estimation.actuator_sim import NoiseSpec, simulate

BACKENDS = _backend.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def valve_clean():
    return simulate(noise=NoiseSpec())


@pytest.fixture(scope="session")
def valve_noisy():
    return simulate(noise=NoiseSpec(15e-3, 1e-3), seed=1)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, ok, detail)``; also prints it."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
