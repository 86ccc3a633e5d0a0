import pytest

from hetproof.lomeli import LomeliParams, fixed_points
from hetproof.manifold import build_chart

from oracles import ARC, LOOP

_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    def record(num, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def loop_params():
    return LomeliParams.from_dict(LOOP)


@pytest.fixture(scope="session")
def arc_params():
    return LomeliParams.from_dict(ARC)


@pytest.fixture(scope="session")
def arc_fixed_points(arc_params):
    return fixed_points(arc_params)


@pytest.fixture(scope="session")
def loop_fixed_points(loop_params):
    return fixed_points(loop_params)


@pytest.fixture(scope="session")
def arc_charts(arc_params, arc_fixed_points):
    fu, fs = arc_fixed_points
    return (build_chart(fu, arc_params, 45, 1.3), build_chart(fs, arc_params, 45, 1.3))
