import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rows_mask(shape, rows):
    m = np.zeros(shape, dtype=bool)
    m[list(rows), :] = True
    return m


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    from cycleprompt.synth import SynthSpec, write_corpus

    root = tmp_path_factory.mktemp("corpus")
    return write_corpus(root, SynthSpec(n_positive=10, n_negative=10, seed=7))


def write_config(path, manifest, out, extra=""):
    path.write_text(
        f"manifest = {manifest}\n"
        f"output_dir = {out}\n"
        "stage.1.kind = reference-ncc\n"
        "stage.1.threshold = 0.18\n" + extra
    )
    return path


_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.failed:
        _acceptance.append((report.nodeid.split("::")[-1], "error"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
