import numpy as np
import pytest

from fragbayes.jeffreys import build_prior_grid
from fragbayes.synthdata import DEFAULT_IM, GeneratorSpec, generate


@pytest.fixture(scope="session")
def small_grid():
    return build_prior_grid(DEFAULT_IM, n_alpha=60, n_beta=60)


@pytest.fixture(scope="session")
def synth_10k():
    return generate(GeneratorSpec(n=10_000, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert the outcome and the time budget."""
    def check(number, passed, detail, elapsed, limit):
        in_time = elapsed < limit
        ok = bool(passed) and in_time
        line = (f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {detail}  "
                f"[{elapsed:.1f} s / limit {limit:g} s]")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, detail
        assert in_time, f"took {elapsed:.1f} s, limit {limit} s"
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
