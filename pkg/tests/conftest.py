import pytest

from wnslv.factors import CoefficientSchedule
from wnslv.model import ModelParams

_CRITERIA = {}


def record_criterion(number: int, passed: bool, detail: str):
    _CRITERIA[number] = (passed, detail)


@pytest.fixture
def criterion():
    return record_criterion


@pytest.fixture
def ref_params():
    return ModelParams(m0=1.0, k_omega=0.0, k_mu=0.0, sigma0=0.0, sigma1=0.2,
                       gamma0=0.0, gamma1=0.2, rho=0.5, c=0.0)


@pytest.fixture
def unit_schedule():
    return CoefficientSchedule.constant((1.0,) * 5, 0.0, 10.0)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        passed, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
