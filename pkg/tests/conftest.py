import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from courserec.dataset import SyntheticSpec, generate_synthetic  # noqa: E402
from courserec.recommender import CBFConfig, CFConfig, RecommenderConfig  # noqa: E402
from courserec.similarity import SetMetric, VectorMetric  # noqa: E402


@pytest.fixture(scope="session")
def default_dataset():
    return generate_synthetic(SyntheticSpec(), seed=7)


@pytest.fixture(scope="session")
def small_dataset():
    spec = SyntheticSpec(students=12, courses=8, professors=6, competences=5, branches=2, areas=3,
                         min_ratings=2, max_ratings=6, vocab_size=40)
    return generate_synthetic(spec, seed=3)


@pytest.fixture
def reference_config():
    """A reference configuration with all three weight groups in use."""
    return RecommenderConfig(
        0.54, 0.46,
        CFConfig(0.60, 0.30, 0.10, 15, VectorMetric.PEARSON, VectorMetric.PEARSON),
        CBFConfig(0.65, 0.00, 0.00, 0.35, SetMetric.JACCARD, SetMetric.JACCARD),
    )


# --- acceptance summary: one PASS/FAIL line per criterion ------------------

_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        if report.outcome == "failed" or name not in _acceptance:
            _acceptance[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
