"""Continuous-time event simulation of both access protocols.

This is the ground truth the chain sampler is checked against.  Messages
arrive on a Poisson stream (or a scripted list); each occupies one channel
for exactly one time unit once admitted.

CSMA admits an arrival iff some channel is idle at that instant, and every
admitted message is delivered.  ALOHA lets the arrival pick one of the kappa
channels uniformly at random: if the pick is busy, the arriving message
vanishes and the resident message is destroyed, but the resident keeps
occupying its channel until its service unit ends, so a destroyed resident
still blocks later arrivals.

Success counting: an admission at time u <= horizon is counted in S(horizon)
according to its eventual fate, which for ALOHA may be decided as late as
u + 1.  The simulation internally processes arrivals up to horizon + 1 so
every counted admission has a settled fate; arrivals after the horizon only
participate as colliders and are excluded from every reported count.

At identical instants a service completion is processed before an arrival: a
channel whose service ends exactly at t counts as idle for an arrival at t.
Such ties have probability zero under the Poisson stream but must be
deterministic for scripted streams.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .core import Counts, Params, ProtocolKind, RandomSource, StepRecord, validate_params

_CHUNK = 8192


@dataclass(frozen=True)
class ArrivalStream:
    """Either a seeded Poisson stream or an explicit list of arrival times."""

    source: RandomSource | None = None
    lam: float | None = None
    times: tuple[float, ...] | None = None

    @staticmethod
    def poisson(source: RandomSource, lam: float) -> "ArrivalStream":
        if not lam > 0:
            raise ValueError("lambda must be positive")
        return ArrivalStream(source=source, lam=lam)

    @staticmethod
    def scripted(times) -> "ArrivalStream":
        ts = tuple(float(t) for t in times)
        _check_scripted(ts)
        return ArrivalStream(times=ts)


def _check_scripted(ts: tuple[float, ...]) -> None:
    if (ts and ts[0] <= 0) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("scripted arrival times must be strictly increasing and positive")


@dataclass(frozen=True)
class Trace:
    """Complete simulation output over [0, horizon]."""

    params: Params
    protocol: ProtocolKind
    horizon: float
    arrivals: np.ndarray      # every arrival time <= horizon
    admissions: np.ndarray    # subsequence of arrivals that entered a channel
    delivered: np.ndarray     # per-admission outcome flag (all True for CSMA)
    steps: list[StepRecord]
    counts: Counts


def next_interarrival(src: RandomSource, lam: float) -> float:
    """One Exp(lambda) gap of the arrival stream."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return src.exponential(lam)


class _PoissonFeed:
    """Arrival cursor drawing the stream in fixed-size blocks; the draw order
    is independent of the horizon, keeping runs bit-reproducible."""

    def __init__(self, source: RandomSource, lam: float) -> None:
        self._src = source
        self._lam = lam
        self._base = 0.0
        self._buf: list[float] = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            gaps = self._src.exponential_block(self._lam, _CHUNK)
            times = np.cumsum(gaps) + self._base
            self._base = float(times[-1])
            self._buf = times.tolist()
            self._i = 0
        t = self._buf[self._i]
        self._i += 1
        return t


def simulate(p: Params, proto: ProtocolKind, arrivals: ArrivalStream, horizon: float,
             pick_source: RandomSource | None = None) -> Trace:
    """Run one protocol over [0, horizon] and return the full trace.

    ``pick_source`` supplies channel picks when a scripted stream drives a
    multi-channel ALOHA run; a Poisson stream uses its own source and a
    single-channel ALOHA run needs no picks at all.
    """
    validate_params(p)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    kappa = p.kappa
    aloha = proto is ProtocolKind.ALOHA

    scripted = arrivals.times is not None
    if scripted:
        _check_scripted(arrivals.times)
        feed_iter = iter(arrivals.times)
        picks = pick_source
    else:
        feed = _PoissonFeed(arrivals.source, arrivals.lam)
        feed_iter = None
        picks = arrivals.source
    if aloha and kappa > 1 and picks is None:
        raise ValueError("multi-channel ALOHA with scripted arrivals needs a pick_source")

    busy_until = [0.0] * kappa
    occupant = [-2] * kappa          # admission index, or -1 for a phantom
    alive = [False] * kappa

    arrival_times: list[float] = []   # real arrivals only
    admissions: list[float] = []
    delivered: list[bool] = []
    adm_arrival_count: list[int] = [] # real arrivals seen up to each admission

    limit = horizon + 1.0 if aloha else horizon
    n_real = 0

    while True:
        if scripted:
            t = next(feed_iter, None)
            if t is None:
                break
        else:
            t = feed.next()
        if t > limit:
            break
        real = t <= horizon
        if real:
            n_real += 1
            arrival_times.append(t)
        if aloha:
            ch = 0 if kappa == 1 else picks.pick_channel(kappa)
            if busy_until[ch] > t:
                # busy pick: the newcomer vanishes, the resident is destroyed
                if alive[ch]:
                    alive[ch] = False
                    occ = occupant[ch]
                    if occ >= 0:
                        delivered[occ] = False
            else:
                busy_until[ch] = t + 1.0
                alive[ch] = True
                if real:
                    occupant[ch] = len(admissions)
                    admissions.append(t)
                    delivered.append(True)
                    adm_arrival_count.append(n_real)
                else:
                    occupant[ch] = -1
        else:
            if not real:
                break
            for ch in range(kappa):
                if busy_until[ch] <= t:
                    busy_until[ch] = t + 1.0
                    admissions.append(t)
                    delivered.append(True)
                    adm_arrival_count.append(n_real)
                    break

    steps: list[StepRecord] = []
    prev_t = 0.0
    prev_n = 0
    for t, n in zip(admissions, adm_arrival_count):
        steps.append(StepRecord(attempts=n - prev_n, gap=t - prev_t))
        prev_t, prev_n = t, n

    delivered_arr = np.array(delivered, dtype=bool)
    counts = Counts(
        attempts_total=n_real,
        successes_total=int(delivered_arr.sum()),
        potential_successes=len(admissions),
    )
    return Trace(
        params=p,
        protocol=proto,
        horizon=float(horizon),
        arrivals=np.array(arrival_times, dtype=float),
        admissions=np.array(admissions, dtype=float),
        delivered=delivered_arr,
        steps=steps,
        counts=counts,
    )


def busy_channels(tr: Trace, time: float) -> int:
    """Number of occupied channels at ``time``.

    A message occupies its channel during [admission, admission + 1), whether
    or not it is later destroyed; rejected newcomers never occupy anything.
    """
    if time < 0:
        raise ValueError("time must be non-negative")
    if time > tr.horizon:
        raise ValueError("time beyond horizon")
    adm = tr.admissions
    # admissions in (time - 1, time]
    return int(bisect_right(adm, time) - bisect_right(adm, time - 1.0))


def success_count(p: Params, proto: ProtocolKind, src: RandomSource, horizon: float,
                  stop_above: int | None = None) -> int:
    """Delivered-count S(horizon) without building a trace.

    Slim path for tail estimation over many runs.  If ``stop_above`` is given
    the run aborts once the delivered count exceeds it; callers that only
    need the indicator of staying at or below a cutoff save the remainder of
    the run.  Early abort never fires on a run that would end at or below the
    cutoff because in-flight messages are not yet counted.
    """
    validate_params(p)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    kappa = p.kappa
    lam = p.lam
    aloha = proto is ProtocolKind.ALOHA
    limit = horizon + 1.0 if aloha else horizon
    need_picks = aloha and kappa > 1

    busy_until = [0.0] * kappa
    alive = [False] * kappa
    counted = [False] * kappa     # occupant is a real admission, fate pending
    delivered = 0

    buf: list[float] = []
    picks: list[int] = []
    i = 0
    base = 0.0
    ch = 0
    while True:
        if i >= len(buf):
            gaps = src.exponential_block(lam, _CHUNK)
            times = np.cumsum(gaps) + base
            base = float(times[-1])
            buf = times.tolist()
            if need_picks:
                picks = src.channel_block(kappa, _CHUNK).tolist()
            i = 0
        t = buf[i]
        if need_picks:
            ch = picks[i]
        i += 1
        if t > limit:
            break
        real = t <= horizon
        if aloha:
            if busy_until[ch] > t:
                if alive[ch]:
                    alive[ch] = False
                    counted[ch] = False   # resident destroyed before settling
            else:
                if counted[ch]:
                    delivered += 1        # previous occupant survived its unit
                    counted[ch] = False
                busy_until[ch] = t + 1.0
                alive[ch] = True
                counted[ch] = real
        else:
            if not real:
                break
            for ch in range(kappa):
                if busy_until[ch] <= t:
                    busy_until[ch] = t + 1.0
                    delivered += 1
                    break
            ch = 0
        if stop_above is not None and delivered > stop_above:
            return delivered
    for ch in range(kappa):
        if alive[ch] and counted[ch]:
            delivered += 1
    return delivered
