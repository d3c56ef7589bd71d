import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from saigc.codec import CARDINALITY, CLUTTER, MAX_CLUTTER, MAX_PHRASES, N_SEMANTIC, Phrase, Prompt

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def prompts(draw, max_clutter=MAX_CLUTTER):
    """Any valid prompt: a subset of semantic phrases in random order plus some clutter."""
    attrs = draw(st.lists(st.integers(0, N_SEMANTIC - 1), unique=True, max_size=N_SEMANTIC))
    phrases = [Phrase(a, draw(st.integers(0, CARDINALITY[a] - 1))) for a in attrs]
    room = min(max_clutter, MAX_PHRASES - len(phrases))
    n_clutter = draw(st.integers(0, room))
    phrases += [Phrase(CLUTTER, draw(st.integers(0, CARDINALITY[CLUTTER] - 1))) for _ in range(n_clutter)]
    order = draw(st.permutations(range(len(phrases))))
    return Prompt(tuple(phrases[i] for i in order))


def random_prompt(rng: np.random.Generator) -> Prompt:
    attrs = [a for a in range(N_SEMANTIC) if rng.random() < 0.6]
    phrases = [Phrase(a, int(rng.integers(CARDINALITY[a]))) for a in attrs]
    n_clutter = int(rng.integers(0, min(MAX_CLUTTER, MAX_PHRASES - len(phrases)) + 1))
    phrases += [Phrase(CLUTTER, int(rng.integers(CARDINALITY[CLUTTER]))) for _ in range(n_clutter)]
    return Prompt(tuple(phrases[i] for i in rng.permutation(len(phrases))))


@pytest.fixture(scope="session")
def small_dataset():
    from saigc.scene import generate_dataset

    return generate_dataset(40, 20, 0)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
