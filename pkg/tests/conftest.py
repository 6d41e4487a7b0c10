from pathlib import Path

import numpy as np
import pytest

from mmretrieval.core import KnowledgeDoc, MultimodalQuery
from mmretrieval.encoder import build_text_vocab, build_vocab, init_params

FIXTURES = Path(__file__).parent / "fixtures"
WORDS = [f"w{i}" for i in range(12)]


@pytest.fixture
def fixtures():
    return FIXTURES


def random_batch_parts(seed, n_queries=4, n_docs=8, visual=5):
    rng = np.random.default_rng(seed)
    qs = [
        MultimodalQuery(f"q{i}", " ".join(rng.choice(WORDS, 3)), tuple(int(v) for v in rng.integers(0, visual, 2)))
        for i in range(n_queries)
    ]
    ds = [KnowledgeDoc(f"d{i}", " ".join(rng.choice(WORDS, 4))) for i in range(n_docs)]
    return qs, ds


def small_params(dim=8, seed=0, scale=0.5, visual=5):
    return init_params(build_text_vocab(WORDS), build_vocab(WORDS), visual, dim, seed, scale)


@pytest.fixture
def params8():
    return small_params()


# -- acceptance reporting ------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, status, detail)``; printed as one line each at the end of the run."""

    def record(criterion: int, ok: bool | None, detail: str) -> None:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        ACCEPTANCE[criterion] = (status, detail)
        print(f"criterion {criterion}: {status} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{status}] criterion {n}: {detail}")
