import numpy as np
import pytest

from macsim.core import Counts, Params, ProtocolKind, RandomSource, StepRecord
from macsim.event_sim import (
    ArrivalStream,
    busy_channels,
    next_interarrival,
    simulate,
    success_count,
)

CSMA = ProtocolKind.CSMA
ALOHA = ProtocolKind.ALOHA


class ScriptedPicks:
    """Deterministic channel chooser for hand-built multi-channel traces."""

    def __init__(self, seq):
        self._it = iter(seq)

    def pick_channel(self, kappa):
        ch = next(self._it)
        assert 0 <= ch < kappa
        return ch


def test_csma_single_channel_hand_trace():
    tr = simulate(Params(1.0, 1), CSMA,
                  ArrivalStream.scripted([0.5, 1.0, 1.6, 2.0, 3.1]), 4.0)
    assert tr.counts == Counts(attempts_total=5, successes_total=3,
                               potential_successes=3)
    assert tr.steps == [StepRecord(1, 0.5), StepRecord(2, 1.1),
                        StepRecord(2, 1.5)]
    assert np.allclose(tr.admissions, [0.5, 1.6, 3.1])
    assert tr.delivered.all()


def test_csma_two_channels_hand_trace():
    tr = simulate(Params(1.0, 2), CSMA,
                  ArrivalStream.scripted([0.2, 0.5, 0.9, 1.1, 1.35, 2.5]), 3.0)
    assert tr.counts == Counts(attempts_total=6, successes_total=4,
                               potential_successes=4)
    assert [r.attempts for r in tr.steps] == [1, 1, 3, 1]
    assert [r.gap for r in tr.steps] == pytest.approx([0.2, 0.3, 0.85, 1.15])


def test_csma_completion_wins_exact_tie():
    # an arrival landing exactly when the resident completes is admitted
    tr = simulate(Params(1.0, 1), CSMA, ArrivalStream.scripted([1.0, 2.0]), 3.0)
    assert tr.counts.successes_total == 2
    assert [r.gap for r in tr.steps] == [1.0, 1.0]


def test_aloha_single_channel_hand_trace():
    tr = simulate(Params(1.0, 1), ALOHA,
                  ArrivalStream.scripted([0.5, 1.2, 1.4, 2.8]), 4.0)
    # the collision at 1.2 kills the resident; the one at 1.4 hits a channel
    # already held by a dead message and destroys nothing further
    assert tr.counts == Counts(attempts_total=4, successes_total=1,
                               potential_successes=2)
    assert tr.steps == [StepRecord(1, 0.5), StepRecord(3, 2.3)]
    assert list(tr.delivered) == [False, True]


def test_aloha_dead_occupant_still_blocks():
    tr = simulate(Params(1.0, 1), ALOHA,
                  ArrivalStream.scripted([0.5, 1.2, 1.4, 2.8]), 4.0)
    assert busy_channels(tr, 1.45) == 1   # held by the destroyed message
    assert busy_channels(tr, 1.6) == 0


def test_aloha_phantom_arrival_beyond_horizon_destroys():
    # arrivals in (horizon, horizon + 1] still collide with residents
    tr = simulate(Params(1.0, 1), ALOHA,
                  ArrivalStream.scripted([0.5, 1.2, 1.9, 2.4, 3.2]), 2.0)
    assert tr.counts == Counts(attempts_total=3, successes_total=0,
                               potential_successes=2)


def test_aloha_two_channels_scripted_picks():
    tr = simulate(Params(1.0, 2), ALOHA,
                  ArrivalStream.scripted([0.3, 0.6, 0.9, 1.5]), 3.0,
                  pick_source=ScriptedPicks([0, 0, 1, 0]))
    assert tr.counts == Counts(attempts_total=4, successes_total=2,
                               potential_successes=3)
    assert [r.attempts for r in tr.steps] == [1, 2, 1]
    assert [r.gap for r in tr.steps] == pytest.approx([0.3, 0.6, 0.6])


def test_aloha_multichannel_scripted_needs_picks():
    with pytest.raises(ValueError):
        simulate(Params(1.0, 2), ALOHA, ArrivalStream.scripted([0.5]), 2.0)


def test_scripted_times_must_increase():
    with pytest.raises(ValueError):
        ArrivalStream.scripted([0.5, 0.5])
    with pytest.raises(ValueError):
        ArrivalStream.scripted([-1.0, 0.5])


def test_simulate_poisson_reproducible():
    p = Params(1.0, 2)
    t1 = simulate(p, CSMA, ArrivalStream.poisson(RandomSource(3), 1.0), 500.0)
    t2 = simulate(p, CSMA, ArrivalStream.poisson(RandomSource(3), 1.0), 500.0)
    assert t1.steps == t2.steps
    assert np.array_equal(t1.arrivals, t2.arrivals)


def test_step_records_consistent_with_counts():
    p = Params(0.7, 2)
    tr = simulate(p, ALOHA, ArrivalStream.poisson(RandomSource(11), 0.7), 2000.0)
    assert len(tr.steps) == tr.counts.potential_successes
    assert sum(r.attempts for r in tr.steps) <= tr.counts.attempts_total
    assert tr.counts.successes_total <= tr.counts.potential_successes
    gaps_end = sum(r.gap for r in tr.steps)
    assert gaps_end == pytest.approx(tr.admissions[-1])


def test_busy_channels_bounds_and_validation():
    tr = simulate(Params(1.0, 2), CSMA,
                  ArrivalStream.poisson(RandomSource(5), 1.0), 100.0)
    for t in np.linspace(0.0, 100.0, 41):
        assert 0 <= busy_channels(tr, float(t)) <= 2
    with pytest.raises(ValueError):
        busy_channels(tr, -0.1)
    with pytest.raises(ValueError):
        busy_channels(tr, 100.5)


def test_success_count_matches_full_trace():
    # multichannel ALOHA draws picks in blocks rather than one by one, so
    # only configs without channel picks replay the exact same randomness
    for proto, kappa in ((CSMA, 2), (ALOHA, 1)):
        p = Params(1.0, kappa)
        n = success_count(p, proto, RandomSource(21), 300.0)
        tr = simulate(p, proto, ArrivalStream.poisson(RandomSource(21), 1.0), 300.0)
        assert n == tr.counts.successes_total


def test_success_count_stop_above_is_conservative():
    p = Params(1.0, 1)
    full = success_count(p, CSMA, RandomSource(8), 200.0)
    cut = 40
    capped = success_count(p, CSMA, RandomSource(8), 200.0, stop_above=cut)
    # the abort only fires on runs that already exceeded the cutoff
    assert (full <= cut) == (capped <= cut)
    if full <= cut:
        assert capped == full


def test_next_interarrival_positive():
    src = RandomSource(1)
    for _ in range(100):
        assert next_interarrival(src, 2.0) > 0
    with pytest.raises(ValueError):
        next_interarrival(src, 0.0)
