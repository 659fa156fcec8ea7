import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macsim.core import HistoryWindow, Params, ProtocolKind, RandomSource
from macsim.kernel import (
    KernelDensity,
    beta,
    beta_integral,
    blocking_profile,
    density,
    gamma,
    run_chain,
    sample_step,
    sigma_marginal,
)

CSMA = ProtocolKind.CSMA
ALOHA = ProtocolKind.ALOHA


def test_gamma_hand_values():
    assert gamma(HistoryWindow.saturated((0.3, 0.4))) == pytest.approx(0.3)
    assert gamma(HistoryWindow.saturated((0.8, 0.9))) == 0.0
    assert gamma(HistoryWindow.saturated(())) == 1.0


def test_gamma_zero_until_kappa_admissions():
    # with fewer than kappa admissions behind it, some channel is idle
    w = HistoryWindow.bootstrap(3).advance(0.1)
    assert w.admitted == 1
    assert gamma(w) == 0.0
    assert gamma(HistoryWindow.bootstrap(1)) == 0.0


def test_beta_hand_values():
    assert beta(HistoryWindow.saturated((0.3,)), 0.5) == 2
    assert beta(HistoryWindow.saturated((0.3,)), 1.5) == 0
    assert beta(HistoryWindow.saturated((0.6, 0.3)), 0.5) == 2


def test_beta_integral_hand_values():
    assert beta_integral(HistoryWindow.saturated(()), 2.0) == 0.0
    h = HistoryWindow.saturated((0.3,))
    assert beta_integral(h, 0.9) == pytest.approx(0.2, abs=1e-12)
    assert beta_integral(h, 0.6) == 0.0  # below gamma = 0.7


def test_beta_integral_matches_fine_grid():
    # independent oracle: midpoint Riemann sum of the step function; each of
    # the <= kappa jumps costs at most one cell width
    n = 20_000
    for gaps in [(0.3,), (0.6, 0.3), (0.2, 0.15), (1.4,)]:
        h = HistoryWindow.saturated(gaps)
        g = gamma(h)
        for s in (0.9, 1.0, 1.3, 2.5):
            if s <= g:
                continue
            step = (s - g) / n
            mids = g + (np.arange(n) + 0.5) * step
            ref = sum(beta(h, float(r)) for r in mids) * step
            assert beta_integral(h, s) == pytest.approx(ref, abs=4 * step)


def test_blocking_profile_shapes():
    g, pieces = blocking_profile(HistoryWindow.saturated(()))
    assert g == 1.0
    assert pieces == [(1.0, math.inf, 0, 0.0)]
    g, pieces = blocking_profile(HistoryWindow.saturated((0.3,)))
    assert g == pytest.approx(0.7)
    (lo0, hi0, b0, bl0), (lo1, hi1, b1, bl1) = pieces
    assert (lo0, hi0, b0, bl0) == (pytest.approx(0.7), 1.0, 1, 0.0)
    assert (lo1, b1) == (1.0, 0)
    assert math.isinf(hi1)
    assert bl1 == pytest.approx(0.3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 2.0), min_size=1, max_size=2),
       st.floats(0.05, 3.0))
def test_blocking_profile_consistent_with_beta_integral(gaps, s):
    h = HistoryWindow.saturated(tuple(gaps))
    g, pieces = blocking_profile(h)
    assert pieces[-1][1] == math.inf and pieces[-1][2] == 0
    prev_hi = g
    for lo, hi, b, b_lo in pieces:
        assert lo == pytest.approx(prev_hi)   # contiguous
        assert 0 <= b <= h.kappa
        prev_hi = hi
        if math.isfinite(hi):
            # running integral agrees with the exact segment sum
            assert b_lo + b * (hi - lo) == pytest.approx(
                beta_integral(h, hi), abs=1e-9)
    if s > g:
        k = beta(h, s)
        match = [pc for pc in pieces if pc[0] < s <= pc[1]]
        if match and not any(abs(s - pc[1]) < 1e-9 for pc in pieces):
            assert match[0][2] == k


def test_density_csma_point_value():
    kd = KernelDensity(CSMA, Params(1.0, 1), HistoryWindow.saturated(()))
    assert density(kd, 1, 1.5) == pytest.approx(0.22313016014842982, rel=1e-12)


def test_density_zero_cases_and_errors():
    kd = KernelDensity(CSMA, Params(1.0, 2), HistoryWindow.saturated((1.5,)))
    assert gamma(kd.history) == 0.0
    assert density(kd, 2, 0.5) == 0.0   # gamma^(k-1) kills k >= 2
    assert density(kd, 1, 0.5) > 0.0    # 0^0 = 1 keeps k = 1 alive
    kd1 = KernelDensity(CSMA, Params(1.0, 1), HistoryWindow.saturated(()))
    assert density(kd1, 1, 0.5) == 0.0  # below gamma
    with pytest.raises(ValueError):
        density(kd1, 0, 1.5)


def test_density_csma_depends_on_history_only_through_gamma():
    p = Params(1.3, 3)
    a = KernelDensity(CSMA, p, HistoryWindow.saturated((0.3, 0.4)))
    b = KernelDensity(CSMA, p, HistoryWindow.saturated((0.4, 0.3)))
    for k in (1, 2, 5):
        for s in (0.35, 0.9, 2.2):
            assert density(a, k, s) == pytest.approx(density(b, k, s), rel=1e-14)


@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_density_aloha_k1_series_marginal(lam):
    kd = KernelDensity(ALOHA, Params(lam, 1), HistoryWindow.saturated(()))
    for s in (1.1, 1.7, 3.0):
        total = sum(density(kd, k, s) for k in range(1, 80))
        assert total == pytest.approx(lam * math.exp(-lam * (s - 1.0)),
                                      abs=1e-10)


def test_density_aloha_two_channel_manual_value():
    lam = 1.0
    h = HistoryWindow.saturated((0.3,))
    kd = KernelDensity(ALOHA, Params(lam, 2), h)
    s = 0.9
    g = gamma(h)              # 0.7
    bint = beta_integral(h, s)  # 0.2
    bcur = beta(h, s)         # 1
    k = 3
    expect = ((g + bint / 2.0) ** (k - 1) / math.factorial(k - 1)
              * (1.0 - bcur / 2.0) * lam ** k * math.exp(-lam * s))
    assert density(kd, k, s) == pytest.approx(expect, rel=1e-12)


def test_sigma_marginal_equals_series_sum():
    for proto, gaps, lam, kappa in [(CSMA, (0.3,), 1.0, 2),
                                    (ALOHA, (0.25, 0.4), 0.8, 3)]:
        kd = KernelDensity(proto, Params(lam, kappa),
                           HistoryWindow.saturated(gaps))
        for s in (0.5, 0.95, 1.8):
            series = sum(density(kd, k, s) for k in range(1, 90))
            assert sigma_marginal(kd, s) == pytest.approx(series, abs=1e-12)


def test_sample_step_gamma_zero_means_single_attempt():
    kd = KernelDensity(CSMA, Params(2.0, 2), HistoryWindow.bootstrap(2))
    src = RandomSource(17)
    for _ in range(50):
        rec = sample_step(kd, src)
        assert rec.attempts == 1


def test_sample_step_deterministic():
    kd = KernelDensity(ALOHA, Params(1.0, 2), HistoryWindow.saturated((0.4,)))
    a = [sample_step(kd, RandomSource(3, stream=i)) for i in range(5)]
    b = [sample_step(kd, RandomSource(3, stream=i)) for i in range(5)]
    assert a == b


def test_run_chain_bootstrap_first_step():
    recs = run_chain(Params(1.0, 2), CSMA, 1, HistoryWindow.bootstrap(2),
                     RandomSource(0))
    assert recs[0].attempts == 1


def test_run_chain_validation():
    with pytest.raises(ValueError):
        run_chain(Params(1.0, 2), CSMA, 0, HistoryWindow.bootstrap(2),
                  RandomSource(0))
    with pytest.raises(ValueError):
        run_chain(Params(1.0, 2), CSMA, 5, HistoryWindow.bootstrap(3),
                  RandomSource(0))


def test_run_chain_deterministic():
    args = (Params(0.7, 2), ALOHA, 200, HistoryWindow.saturated((2.0,)))
    assert run_chain(*args, RandomSource(42)) == run_chain(*args, RandomSource(42))


def test_chain_mean_sigma_csma_k1(csma_k1_chain_1m):
    gaps = np.array([r.gap for r in csma_k1_chain_1m])
    assert gaps.mean() == pytest.approx(2.0, abs=0.005)


def test_chain_matches_event_sim_mean_gap():
    from macsim.event_sim import ArrivalStream, simulate
    p = Params(1.0, 2)
    recs = run_chain(p, CSMA, 20_000, HistoryWindow.saturated((2.0,)),
                     RandomSource(6))
    tr = simulate(p, CSMA, ArrivalStream.poisson(RandomSource(60), 1.0), 30_000.0)
    chain_mean = np.mean([r.gap for r in recs])
    sim_mean = np.mean([r.gap for r in tr.steps])
    assert chain_mean == pytest.approx(sim_mean, abs=0.02)
