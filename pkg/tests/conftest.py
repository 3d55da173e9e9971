import random

import numpy as np
import pytest

from crowdconsensus import VoteTable, build_vote_table

_ACCEPTANCE = {}


def record(criterion, passed, detail=""):
    _ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (len(k), k)):
        status, detail = _ACCEPTANCE[key]
        label = {True: "PASS", False: "FAIL", None: "SKIP"}[status]
        terminalreporter.write_line(f"[{label}] criterion {key}: {detail}")


@pytest.fixture
def acceptance():
    return record


def random_instance(rng: random.Random, max_obs=10, max_users=6, max_species=4, max_votes=3,
                    redo_rate=0.2):
    """Small random vote table as (rows, author, n_user, n_species).

    Rows are in file order and may repeat an (obs, user) pair; the last row wins.
    """
    n_obs = rng.randint(1, max_obs)
    n_user = rng.randint(1, max_users)
    K = rng.randint(1, max_species)
    author = [rng.randrange(n_user) for _ in range(n_obs)]
    rows = []
    for i in range(n_obs):
        k = rng.randint(1, min(max_votes, n_user))
        others = rng.sample([u for u in range(n_user) if u != author[i]], k - 1)
        for u in [author[i]] + others:
            rows.append((i, u, rng.randrange(K)))
            if rng.random() < redo_rate:
                rows.append((i, u, rng.randrange(K)))
    rng.shuffle(rows)
    return rows, author, n_user, K


def table_from_rows(rows, author, n_user, K) -> VoteTable:
    o, u, s = zip(*rows)
    return VoteTable.from_codes(o, u, s, author, n_user=n_user, n_species=K)


@pytest.fixture
def fixture_trace_table():
    """A authors obs1..obs8 (species k1..k8) with C and D agreeing, plus obs9 alone."""
    votes, authors = [], []
    for k in range(1, 9):
        o = f"obs{k}"
        votes += [(o, "A", f"k{k}"), (o, "C", f"k{k}"), (o, "D", f"k{k}")]
        authors.append((o, "A"))
    votes.append(("obs9", "A", "k9"))
    authors.append(("obs9", "A"))
    return build_vote_table(votes, authors)


def assert_same_result(a, b, scores=True):
    np.testing.assert_array_equal(a.labels, b.labels)
    if scores:
        np.testing.assert_array_equal(a.valid, b.valid)
        np.testing.assert_array_equal(a.confidence, b.confidence)
        np.testing.assert_array_equal(a.accuracy_ratio, b.accuracy_ratio)
    np.testing.assert_array_equal(a.user_weights, b.user_weights)
    assert a.iterations_run == b.iterations_run
    assert a.converged == b.converged
