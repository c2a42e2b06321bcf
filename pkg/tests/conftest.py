import pytest

from eliteness.corpus import Document, build_index
from eliteness.mixture import EMConfig, TwoPoissonParams, fit_model
from eliteness.synthetic import generate, random_params

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome, then assert it."""
    def check(name: str, ok: bool, detail: str = ""):
        _CRITERIA.append((name, bool(ok), detail))
        assert ok, f"{name}: {detail}"
    return check


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_index():
    return build_index([Document("d1", "a b a"), Document("d2", "b")])


@pytest.fixture(scope="session")
def synth():
    return generate(400, random_params(12, seed=3), seed=3)


@pytest.fixture(scope="session")
def synth_index(synth):
    return synth.to_index()


@pytest.fixture(scope="session")
def synth_model(synth_index):
    return fit_model(synth_index, EMConfig())


PLANTED = TwoPoissonParams(mu_elite=5.0, mu_nonelite=0.2, p_elite=0.1)
