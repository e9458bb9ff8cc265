import pytest

from articulate.percept import PerceptConfig
from articulate.synth import Dataset, DatasetConfig, make_dataset

# a low-resolution stand-in for the default data and model, fast enough for unit tests
TINY_DATA = DatasetConfig(train=64, val=8, test=8, seed=1, resolution=16, n_points=32)
TINY_MODEL = PerceptConfig(K=8, n_points=32, resolution=16, heads=2)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny_data")
    make_dataset(TINY_DATA, path)
    return Dataset(path)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(cid: str, ok: bool, detail: str) -> bool:
        line = f"{cid} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
