import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import surrogate  # noqa: E402

FIRST_ROWS = """age,sex,bmi,children,smoker,region,charges
19,female,27.9,0,yes,southwest,16884.924
18,male,33.77,1,no,southeast,1725.5523
28,male,33,3,no,southeast,4449.462
33,male,22.705,0,no,northwest,21984.47061
32,male,28.88,0,no,northwest,3866.8552
31,female,25.74,0,no,southeast,3756.6216
46,female,33.44,1,no,southeast,8240.5896
37,female,27.74,3,no,northwest,7281.5056
37,male,29.83,2,no,northeast,6406.4107
60,female,25.84,0,no,northwest,28923.13692
"""


@pytest.fixture
def head_csv(tmp_path):
    path = tmp_path / "insurance_head.csv"
    path.write_text(FIRST_ROWS)
    return path


@pytest.fixture(scope="session")
def surrogate_csv(tmp_path_factory):
    return surrogate.write_csv(tmp_path_factory.mktemp("data") / "surrogate.csv", n=200, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
