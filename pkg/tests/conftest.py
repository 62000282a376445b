import sys
from pathlib import Path

import numpy as np
import pytest

from corpusgan.synthetic import make_topical_corpora
from corpusgan.text import prepare_corpora

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def small_prepared():
    """Two separable synthetic corpora, 60 documents each."""
    corpora = make_topical_corpora(docs_per_corpus=60, n_topical=20, n_shared=20, doc_length=(15, 30), seed=3)
    return prepare_corpora(corpora, v_max=200)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic():
    """The 400-document, V=200 two-corpus setup with trained embeddings and LDA."""
    import pipeline

    return pipeline.build()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance")
        for line in sorted(mod.LINES, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
