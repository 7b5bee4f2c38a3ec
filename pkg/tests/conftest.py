import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from surrogate_effects.fixtures import FIXTURES  # noqa: E402
from surrogate_effects.sem import implied_covariance  # noqa: E402

# fixed example sequence so reruns see the same models
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def docs():
    return {name: fx.document for name, fx in FIXTURES.items()}


@pytest.fixture(scope="session")
def graphs(docs):
    return {name: d.diagram for name, d in docs.items()}


@pytest.fixture(scope="session")
def models(docs):
    return {name: d.to_sem() for name, d in docs.items()}


@pytest.fixture(scope="session")
def full_cov(models):
    """Exact implied covariance over all vertices, latent included."""
    return {name: implied_covariance(m) for name, m in models.items()}


@pytest.fixture(scope="session")
def observed_cov(full_cov, graphs):
    return {
        name: cov.marginal([v for v in cov.labels if v in graphs[name].observed])
        for name, cov in full_cov.items()
    }


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
