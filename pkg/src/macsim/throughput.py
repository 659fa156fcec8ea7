"""Closed-form expected throughputs, the many-channel asymptotic, and the
optimal-density search for ALOHA.

The CSMA value is exact for the simulated dynamics.  The ALOHA value treats
the channel occupancy seen by an arrival as a free Poisson field: the chance
that the picked channel is idle is averaged over a Poisson(lambda) number of
busy channels, and the chance of surviving the service unit is
exp(-lambda/kappa).  The survival factor is exact; the idle-pick factor is a
stationary approximation that ignores the occupancy correlations the
admission process induces, so simulated delivery rates sit measurably above
this formula at moderate densities (see the acceptance suite and README).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Params, ProtocolKind, validate_params
from .numerics import guarded_grid_max

__all__ = [
    "ThroughputResult",
    "poisson_cdf",
    "s_csma",
    "s_aloha",
    "s_aloha_forms",
    "aloha_asymptotic",
    "optimize_lambda_aloha",
]


@dataclass(frozen=True)
class ThroughputResult:
    """Long-run delivered messages per unit time for one configuration."""

    value: float
    protocol: ProtocolKind
    params: Params


def poisson_cdf(lam: float, m: int) -> float:
    """P(N <= m) for N ~ Poisson(lam); m = -1 gives 0.

    Forward recursion on the terms, so no factorials overflow.
    """
    if m < 0:
        return 0.0
    term = math.exp(-lam)
    total = term
    for n in range(1, m + 1):
        term *= lam / n
        total += term
    return total


def s_csma(p: Params) -> ThroughputResult:
    """lambda * P(N <= kappa-1) / P(N <= kappa), N ~ Poisson(lambda).

    Arrival rate times the stationary probability that an arrival finds a
    free channel, the busy-channel count being Poisson conditioned on <= kappa.
    """
    validate_params(p)
    value = p.lam * poisson_cdf(p.lam, p.kappa - 1) / poisson_cdf(p.lam, p.kappa)
    return ThroughputResult(value=value, protocol=ProtocolKind.CSMA, params=p)


def s_aloha_forms(p: Params) -> tuple[float, float, float]:
    """The three algebraically equal expressions for the ALOHA closed form.

    Kept separate so tests can pin their pointwise agreement.
    """
    validate_params(p)
    lam, kappa = p.lam, p.kappa
    # raw sum with the combined exponential prefactor
    term = 1.0
    acc = 0.0
    for n in range(kappa):
        if n > 0:
            term *= lam / n
        acc += term * (kappa - n) / kappa
    form_sum = lam * math.exp(-(kappa + 1) * lam / kappa) * acc
    # bracket of two partial sums
    s1 = 0.0
    s2 = 0.0
    term = 1.0
    for n in range(kappa):
        if n > 0:
            term *= lam / n
        s1 += term
        if n <= kappa - 2:
            s2 += term
    form_bracket = lam * math.exp(-lam / kappa) * math.exp(-lam) * (s1 - (lam / kappa) * s2)
    # Poisson-cdf reading
    form_cdf = lam * math.exp(-lam / kappa) * (
        poisson_cdf(lam, kappa - 1) - (lam / kappa) * poisson_cdf(lam, kappa - 2)
    )
    return form_sum, form_bracket, form_cdf


def s_aloha(p: Params) -> ThroughputResult:
    """Closed-form ALOHA throughput (idle-pick factor times survival factor)."""
    value = s_aloha_forms(p)[2]
    return ThroughputResult(value=value, protocol=ProtocolKind.ALOHA, params=p)


def aloha_asymptotic(x: float) -> float:
    """Per-channel ALOHA throughput limit at density x per channel."""
    if x < 0:
        raise ValueError("x must be non-negative")
    return x * (1.0 - x) * math.exp(-x)


def optimize_lambda_aloha(kappa: int) -> tuple[float, float]:
    """Arrival density maximizing the ALOHA closed form over (0, 2*kappa].

    Coarse grid at step kappa/200 first (with a guard that refuses to pick
    between two separated maxima), then golden-section refinement to 1e-6.
    """
    if kappa < 1:
        raise ValueError("kappa must be at least 1")

    def objective(lam: float) -> float:
        return s_aloha(Params(lam=lam, kappa=kappa)).value

    step = kappa / 200.0
    lam_star, value = guarded_grid_max(objective, step, 2.0 * kappa, step, refine_tol=1e-6)
    return lam_star, value
