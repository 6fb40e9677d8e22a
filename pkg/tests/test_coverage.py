import pytest

from covsteer.coverage import CoverageState, absorb, coverage_percent, remaining, write_checkpoints_csv
from covsteer.duvsim import CoverageEvent
from covsteer.errors import CoverageError
from covsteer.params import DuvParams


@pytest.fixture
def state():
    return CoverageState.for_params(DuvParams())


def pipeline_keys(state):
    return sorted(k for k in state.universe if k.group == "PIPELINE")


def test_empty(state):
    absorb(state, [])
    assert coverage_percent(state) == 0.0
    assert len(remaining(state)) == 842


def test_same_event_twice(state):
    ev = CoverageEvent("PIPELINE", (0, "RRR", "AAA"))
    absorb(state, [ev])
    absorb(state, [ev])
    assert state.n_covered == 1
    assert state.hits[ev] == 2


def test_all_pipeline_keys(state):
    absorb(state, pipeline_keys(state))
    assert state.group_percent("PIPELINE") == 100.0
    assert state.group_percent("PACING") == 0.0


def test_all_keys(state):
    absorb(state, list(state.universe))
    assert coverage_percent(state) == 100.0
    assert remaining(state) == []


def test_half_of_160():
    keys = frozenset(pipeline_keys(CoverageState.for_params()))
    s = CoverageState(universe=keys)
    absorb(s, sorted(keys)[:80])
    assert coverage_percent(s) == 50.0


def test_unknown_key(state):
    with pytest.raises(CoverageError, match="not in the product universe"):
        absorb(state, [CoverageEvent("PIPELINE", (9, "RRR", "AAA"))])


def test_checkpoints(state, tmp_path):
    absorb(state, pipeline_keys(state)[:10], tests=3)
    state.checkpoint()
    absorb(state, pipeline_keys(state)[10:20], tests=2)
    assert state.checkpoint() == (5, pytest.approx(100 * 20 / 842))
    write_checkpoints_csv(state, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "tests_simulated,coverage_percent" and len(lines) == 3


def test_rarity_histogram(state):
    k = pipeline_keys(state)
    absorb(state, [k[0], k[0], k[1]])
    hist = state.rarity_histogram()
    assert hist == {0: 840, 1: 1, 2: 1}


def test_copy_is_independent(state):
    c = state.copy()
    absorb(c, pipeline_keys(state)[:1])
    assert state.n_covered == 0 and c.n_covered == 1
