import pytest

from reinsdiv import ModelParams


def fig_params(k2: float) -> ModelParams:
    return ModelParams.dirac(k1=0.2, k2=k2, beta=0.0011, zeta0=0.04, r=0.07, rho=0.1)


@pytest.fixture(scope="session")
def fig1():
    return fig_params(0.25)


@pytest.fixture(scope="session")
def fig2():
    return fig_params(0.19)


@pytest.fixture(scope="session")
def two_atoms():
    """Two claim sizes, scaled so every claim leaves a positive reserve."""
    from reinsdiv import ClaimLaw
    return ModelParams(k1=0.1, k2=0.3, beta=0.5, zeta0=2.0, r=0.6, rho=0.5,
                       claims=ClaimLaw(((0.5, 0.4), (1.0, 0.6))))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    def emit(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
