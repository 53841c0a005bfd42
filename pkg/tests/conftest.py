import numpy as np
import pytest

from rvefem import LinearElastic, MooneyRivlin

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(':'))):
        terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record a PASS/FAIL line for an acceptance criterion."""
    def _report(number, ok, detail):
        status = 'PASS' if ok else 'FAIL'
        line = f"[{status}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


@pytest.fixture
def soft_hard():
    return {1: LinearElastic(1.0, 0.3), 2: LinearElastic(10.0, 0.3)}


@pytest.fixture
def rubber():
    return {1: MooneyRivlin(0.4, 0.1, 20.0), 2: MooneyRivlin(4.0, 1.0, 200.0)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


RUBBER_CARDS = """\
*MAT_MOONEY_RIVLIN
1, 0.0, 0.4, 0.1, 20.0
2, 0.0, 4.0, 1.0, 200.0
*PART
1, 1
2, 2
"""

ELASTIC_CARDS = """\
*MAT_ELASTIC
1, 0.0, 1.0, 0.3
2, 0.0, 10.0, 0.3
*PART
1, 1
2, 2
"""


@pytest.fixture
def make_case(tmp_path):
    """Write a mesh file plus a deck referencing it; returns the deck path.

    ``flags`` is the inpt..imatch line and ``H`` the first H line.
    """
    from rvefem.deck_io import write_mesh_keyword

    def _make(mesh, cards=RUBBER_CARDS, flags="0, 1, 1, 3, 0, 1", H="0.5", extra="",
              name='run.k'):
        with open(tmp_path / 'mesh.k', 'w') as fh:
            write_mesh_keyword(mesh, fh)
        text = (cards + "*RVE_ANALYSIS_FEM\nmesh.k\n" + flags + "\n" + H + "\n"
                + "*DEFINE_CURVE\n1\n0.0, 0.0\n1.0, 1.0\n" + extra + "*END\n")
        path = tmp_path / name
        path.write_text(text)
        return path
    return _make
