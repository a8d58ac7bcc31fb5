from pathlib import Path

import numpy as np
import pytest

from glory.bundle import build_bundle
from glory.config import HyperParams
from glory.graphs import build_entity_graph, build_news_graph
from glory.synthetic import write_corpus

DATA = Path(__file__).parent / "data"


def small_hp(**kw) -> HyperParams:
    base = dict(d_model=16, word_dim=16, entity_dim=8, pool_dim=8, heads=2,
                L_his=10, M_n=4, K=2, M_e=3, ggnn_layers=2)
    base.update(kw)
    return HyperParams(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus"), seed=0)


@pytest.fixture(scope="session")
def bundle(corpus):
    return build_bundle(corpus["news"], corpus["behaviors"], corpus["word_emb"], corpus["entity_emb"],
                        word_dim=16, entity_dim=8)


@pytest.fixture(scope="session")
def graphs(bundle):
    return build_news_graph(bundle.train_logs), build_entity_graph(bundle.train_logs, bundle.catalog)


# one verdict line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
