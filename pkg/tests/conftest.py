import numpy as np
import pytest
import torch

from trimodal.dataprep import build_dataset
from trimodal.toy import toy_entries, toy_prep_config
from trimodal import archive

torch.set_num_threads(1)


TETRA_OFF = """OFF
4 4 0
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""


@pytest.fixture
def tetra_off(tmp_path):
    p = tmp_path / "tetra.off"
    p.write_text(TETRA_OFF)
    return p


@pytest.fixture(scope="session")
def tiny_archive(tmp_path_factory):
    """Six small objects (two per family), cheap enough for trainer unit tests."""
    root = tmp_path_factory.mktemp("tiny")
    entries = toy_entries(train_per_class=2, test_per_class=1, seed=3)
    archive.write_jsonl(root / "in.jsonl", entries)
    cfg = toy_prep_config(num_points=64, num_views=4, resolution=(32, 32), faces=64)
    build_dataset(root / "in.jsonl", root / "data", cfg)
    return root / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion():
    """Record a one-line verdict for the acceptance summary."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
