import numpy as np
import pytest

from oneid.core import BanditInstance


class ScriptedStream:
    """Stand-in for ``RngStream`` feeding fixed noise sequences.

    ``script[(period, arm)]`` lists the noise values of that arm's stream;
    values past the end repeat the last one.
    """

    def __init__(self, script, key=()):
        self.script = script
        self.seed = 0
        self.key = key

    def substream(self, *ids):
        return ScriptedStream(self.script, self.key + ids)

    def noise(self, n, noise):
        vals = list(self.script.get(self.key, [0.0]))
        if len(vals) < n:
            vals += [vals[-1]] * (n - len(vals))
        return np.array(vals[:n], dtype=float)


@pytest.fixture
def scripted():
    return ScriptedStream


@pytest.fixture
def two_arm():
    return BanditInstance((0.9, 0.5), 0.7)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    def log(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
            terminalreporter.write_line(line)
