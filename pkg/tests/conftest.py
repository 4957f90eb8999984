import pytest

from stratlab.kernels import CovarianceKernel

# One representative critical kernel per family.
REFERENCE_KERNELS = {
    "fbm": CovarianceKernel.fbm(1 / 6),
    "bbm": CovarianceKernel.bbm(1 / 4, 2 / 3),
    "ext-bbm": CovarianceKernel.ext_bbm(1 / 9, 1.5),
    "sfbm": CovarianceKernel.sfbm(1 / 3),
}


@pytest.fixture(params=sorted(REFERENCE_KERNELS))
def ref_kernel(request):
    return REFERENCE_KERNELS[request.param]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[number])
