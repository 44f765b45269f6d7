import numpy as np
import pytest

from ex2sm.ingest import catalog_from_strings
from ex2sm.rsa import Position

PAIR = ["CATTATTAGGA", "CATTCA"]


def pos(*items):
    """``pos("0.1", "0.4")`` -> tuple of Position."""
    return tuple(Position.parse(s) for s in items)


def random_texts(rng, alphabet, n_seqs, total):
    """``n_seqs`` random strings over ``alphabet`` whose lengths sum to ``total``."""
    cuts = np.sort(rng.choice(np.arange(1, total), n_seqs - 1, replace=False)) if n_seqs > 1 else []
    lengths = np.diff(np.concatenate([[0], cuts, [total]])).astype(int)
    symbols = np.array(list(alphabet))
    return ["".join(rng.choice(symbols, k)) for k in lengths]


@pytest.fixture
def make_catalog(tmp_path):
    counter = iter(range(10**6))

    def make(texts, alphabet="ACGT"):
        return catalog_from_strings(texts, tmp_path / f"cat{next(counter)}", alphabet=alphabet)

    return make


@pytest.fixture
def pair_catalog(make_catalog):
    return make_catalog(PAIR)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
