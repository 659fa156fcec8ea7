import numpy as np
import pytest

from macsim.core import (
    SENTINEL_GAP,
    Counts,
    HistoryWindow,
    Params,
    RandomSource,
    StepRecord,
    steps_from_csv_lines,
    steps_to_csv_lines,
    validate_params,
)


def test_validate_params_accepts_good_values():
    p = Params(lam=0.5, kappa=3)
    assert validate_params(p) is p


@pytest.mark.parametrize("lam,kappa", [
    (0.0, 1), (-1.0, 1), (float("nan"), 1), (float("inf"), 1),
    (1.0, 0), (1.0, -2), (1.0, 1.5), (True, 1), (1.0, True),
])
def test_validate_params_rejects(lam, kappa):
    with pytest.raises(ValueError):
        validate_params(Params(lam=lam, kappa=kappa))


def test_step_record_bounds():
    with pytest.raises(ValueError):
        StepRecord(attempts=0, gap=1.0)
    with pytest.raises(ValueError):
        StepRecord(attempts=1, gap=0.0)
    r = StepRecord(attempts=2, gap=0.25)
    assert (r.attempts, r.gap) == (2, 0.25)


def test_history_window_bootstrap_and_advance():
    w = HistoryWindow.bootstrap(3)
    assert w.gaps == (SENTINEL_GAP, SENTINEL_GAP)
    assert w.admitted == 0
    assert w.kappa == 3
    w1 = w.advance(0.4)
    assert w1.gaps == (SENTINEL_GAP, 0.4)
    assert w1.admitted == 1
    w3 = w1.advance(0.7).advance(0.2)
    assert w3.gaps == (0.7, 0.2)
    # the admitted counter saturates at kappa
    assert w3.admitted == 3
    assert w3.advance(0.1).admitted == 3


def test_history_window_saturated_single_channel():
    w = HistoryWindow.saturated(())
    assert w.kappa == 1
    assert w.admitted == 1
    assert w.advance(2.5).gaps == ()


def test_random_source_reproducible_streams():
    a = RandomSource(123, stream=4)
    b = RandomSource(123, stream=4)
    c = RandomSource(123, stream=5)
    xs = [a.exponential(1.0) for _ in range(5)]
    ys = [b.exponential(1.0) for _ in range(5)]
    zs = [c.exponential(1.0) for _ in range(5)]
    assert xs == ys
    assert xs != zs
    assert np.array_equal(RandomSource(9).exponential_block(2.0, 8),
                          RandomSource(9).exponential_block(2.0, 8))


def test_random_source_pick_channel_range():
    src = RandomSource(0)
    picks = [src.pick_channel(3) for _ in range(200)]
    assert set(picks) <= {0, 1, 2}
    assert len(set(picks)) == 3


def test_steps_csv_round_trip():
    recs = [StepRecord(1, 0.5), StepRecord(4, 1.2345678901234567),
            StepRecord(2, 3.0)]
    lines = steps_to_csv_lines(recs)
    assert lines[0] == "index,attempts,gap"
    back = steps_from_csv_lines(lines)
    assert back == recs


def test_steps_csv_skips_comments_and_blank_lines():
    lines = ["# config something", "", "index,attempts,gap", "0,2,0.5"]
    assert steps_from_csv_lines(lines) == [StepRecord(2, 0.5)]


def test_counts_fields():
    c = Counts(attempts_total=5, successes_total=2, potential_successes=3)
    assert (c.attempts_total, c.successes_total, c.potential_successes) == (5, 2, 3)
