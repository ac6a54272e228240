import pytest

from shotnoise.exponent import canonical_params, solve_R


@pytest.fixture(scope="session")
def canonical():
    return canonical_params(u=0.0, lambda0=1.0)


@pytest.fixture(scope="session")
def canonical_adj(canonical):
    return solve_R(canonical)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
