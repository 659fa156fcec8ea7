"""Transition kernel of the admission chain: density, sampling, stepping.

The sequence of admission steps (attempts, gap) is a Markov chain whose state
is the window of the kappa-1 most recent gaps.  Three statistics of the
window drive everything:

    gamma      residual time until some channel frees up, [1 - sum of gaps]_+,
               positive only when all kappa channels are backed by real
               admissions (the current one plus the kappa-1 behind the gaps);
    beta(s)    number of busy channels s time units after the last admission:
               the m-th most recent admission is still in service iff
               s + (sum of the m-1 most recent gaps) <= 1;
    B(s)       running integral of beta from gamma to s.

CSMA's next step: no arrival in (0, gamma] is admitted (all channels busy),
the first arrival after gamma is.  So the gap is gamma + Exp(lambda) and the
attempt count is 1 + Poisson(lambda * gamma).

ALOHA's next step additionally thins arrivals after gamma: a candidate at
offset r hits a busy channel with probability beta(r)/kappa and is rejected
(the window's own residents keep blocking even when destroyed, so beta is
unaffected by collisions).

During the bootstrap phase of a run the window is padded with sentinel gaps
and carries the count of real admissions behind it; blocking terms that
would refer to admissions that never happened are switched off.  Once
kappa admissions have occurred the window is saturated and the formulas
above apply verbatim.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import HistoryWindow, Params, ProtocolKind, RandomSource, StepRecord, validate_params

__all__ = [
    "KernelDensity",
    "gamma",
    "beta",
    "beta_integral",
    "blocking_profile",
    "density",
    "sigma_marginal",
    "sample_step",
    "run_chain",
]


def gamma(h: HistoryWindow) -> float:
    """Residual blocking time after the last admission.

    Positive only once every channel is occupied by a real admission, which
    needs kappa of them: the current one and the kappa-1 spanned by the
    window.  With fewer, some channel is idle immediately and gamma is 0.
    """
    if h.admitted < h.kappa:
        return 0.0
    return max(0.0, 1.0 - sum(h.gaps))


def _thresholds(h: HistoryWindow) -> list[float]:
    """Descending offsets at which the busy-channel count drops by one.

    Entry m-1 is the latest offset at which the m-th most recent admission is
    still in service.  Only admissions that actually happened contribute.
    """
    mcap = min(h.admitted, h.kappa)
    ds: list[float] = []
    acc = 1.0
    for m in range(mcap):
        if m > 0:
            acc -= h.gaps[-m]
        ds.append(acc)
    return ds


def beta(h: HistoryWindow, s: float) -> int:
    """Busy channels ``s`` time units after the last admission.

    Returns the raw count for any s > 0; callers integrating the kernel
    restrict attention to s >= gamma(h), where the kernel is supported.
    """
    count = 0
    for d in _thresholds(h):
        if s <= d:
            count += 1
        else:
            break
    return count


def beta_integral(h: HistoryWindow, s: float) -> float:
    """Integral of beta over [gamma(h), s], exact.

    Each admission contributes the overlap of its in-service offset range
    (0, d_m] with [gamma, s], so the integral is a sum of clamped segments;
    no quadrature is involved.
    """
    g = gamma(h)
    if s <= g:
        return 0.0
    total = 0.0
    for d in _thresholds(h):
        total += max(0.0, min(s, d) - g)
    return total


def blocking_profile(h: HistoryWindow):
    """Piecewise-constant decomposition of beta above gamma.

    Returns (gamma, pieces) where pieces is a list of (lo, hi, b, B_lo):
    beta equals ``b`` on (lo, hi] and the running integral at ``lo`` is
    ``B_lo``; the last piece has hi = inf and b = 0.  Used by the operator
    discretization, which integrates the kernel in closed form per piece.
    """
    g = gamma(h)
    # thresholds within rounding of gamma or of each other collapse: separate
    # summation orders can split an exact tie by a few ulps, which would
    # otherwise leave sliver pieces claiming every channel busy
    tie = 1e-12
    ds = sorted(d for d in _thresholds(h) if d > g + tie)
    pieces: list[tuple[float, float, int, float]] = []
    lo = g
    b_int = 0.0
    while ds:
        hi = ds[0]
        b = len(ds)
        pieces.append((lo, hi, b, b_int))
        b_int += b * (hi - lo)
        ds = [d for d in ds if d > hi + tie]
        lo = hi
    pieces.append((lo, math.inf, 0, b_int))
    return g, pieces


@dataclass(frozen=True)
class KernelDensity:
    """Transition density of one admission step from a fixed window."""

    protocol: ProtocolKind
    params: Params
    history: HistoryWindow

    def __post_init__(self) -> None:
        validate_params(self.params)
        if self.history.kappa != self.params.kappa:
            raise ValueError("history window length must be kappa - 1")


def density(kd: KernelDensity, k: int, s: float) -> float:
    """Joint density of (attempts = k, gap in ds) at s, for k >= 1.

    CSMA:  (lam*gamma)^(k-1)/(k-1)! * lam * exp(-lam*s)        on s >= gamma
    ALOHA: (gamma + B(s)/kappa)^(k-1)/(k-1)! * (1 - beta(s)/kappa)
           * lam^k * exp(-lam*s)                               on s >= gamma

    with the 0^0 = 1 convention when the k = 1 coefficient degenerates.
    Evaluated in log space so large k cannot overflow.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    lam = kd.params.lam
    kappa = kd.params.kappa
    h = kd.history
    g = gamma(h)
    if s <= 0.0 or s < g:
        return 0.0
    if kd.protocol is ProtocolKind.CSMA:
        coef = lam * g
        factor_log = math.log(lam) - lam * s
    else:
        b = beta(h, s)
        coef = lam * (g + beta_integral(h, s) / kappa)
        thin = 1.0 - b / kappa
        if thin <= 0.0:
            return 0.0
        factor_log = math.log(lam) + math.log(thin) - lam * s
    if k == 1:
        power_log = 0.0
    elif coef <= 0.0:
        return 0.0
    else:
        power_log = (k - 1) * math.log(coef) - math.lgamma(k)
    return math.exp(power_log + factor_log)


def sigma_marginal(kd: KernelDensity, s: float) -> float:
    """Gap density with attempts summed out, in closed form."""
    lam = kd.params.lam
    kappa = kd.params.kappa
    h = kd.history
    g = gamma(h)
    if s <= 0.0 or s < g:
        return 0.0
    if kd.protocol is ProtocolKind.CSMA:
        return lam * math.exp(-lam * (s - g))
    b = beta(h, s)
    thin = 1.0 - b / kappa
    if thin <= 0.0:
        return 0.0
    return thin * lam * math.exp(-lam * (s - g - beta_integral(h, s) / kappa))


def sample_step(kd: KernelDensity, src: RandomSource) -> StepRecord:
    """Draw one admission step from the window, exactly per the density.

    CSMA is sampled directly from its closed form.  ALOHA is sampled
    generatively: arrivals in (0, gamma] all bounce (Poisson count), then
    candidates arrive at Exp(lambda) spacings and the one at offset r is
    admitted with probability 1 - beta(r)/kappa.
    """
    lam = kd.params.lam
    kappa = kd.params.kappa
    h = kd.history
    g = gamma(h)
    blocked = src.poisson(lam * g) if g > 0.0 else 0
    if kd.protocol is ProtocolKind.CSMA:
        return StepRecord(attempts=1 + blocked, gap=g + src.exponential(lam))
    rejected = 0
    r = g
    while True:
        r += src.exponential(lam)
        b = beta(h, r)
        if b and src.uniform() * kappa < b:
            rejected += 1
            continue
        return StepRecord(attempts=1 + blocked + rejected, gap=r)


def run_chain(p: Params, proto: ProtocolKind, n: int, init: HistoryWindow,
              src: RandomSource) -> list[StepRecord]:
    """Sample ``n`` consecutive steps, sliding the window by one gap each time."""
    validate_params(p)
    if n < 1:
        raise ValueError("n must be at least 1")
    if init.kappa != p.kappa:
        raise ValueError("history window length must be kappa - 1")
    out: list[StepRecord] = []
    h = init
    for _ in range(n):
        rec = sample_step(KernelDensity(proto, p, h), src)
        out.append(rec)
        h = h.advance(rec.gap)
    return out
