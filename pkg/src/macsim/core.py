"""Shared domain types for the multi-channel access simulator.

Everything downstream works with the pair (lam, kappa): arrival intensity of
the Poisson stream and the number of unit-service channels.  Admission gaps
are kept in plain double precision; the service time is the time unit, so no
conversions happen anywhere.

History ordering convention, stated once here and relied on everywhere: a
``HistoryWindow`` stores the most recent admission gaps oldest first, so
``gaps[-1]`` is the gap that ended with the current admission.  Blocking
formulas that walk "the m-1 most recent gaps" therefore iterate ``gaps``
from the right.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

# History filler for slots that precede the first admissions of a run.  Any
# value >= 1 makes the residual blocking time vanish and knocks out every
# busy-channel term that would look past the real admissions.
SENTINEL_GAP = 2.0


class ProtocolKind(enum.Enum):
    ALOHA = "aloha"
    CSMA = "csma"


@dataclass(frozen=True)
class Params:
    """Model configuration: arrival intensity and channel count."""

    lam: float
    kappa: int


def validate_params(p: Params) -> Params:
    """Return ``p`` unchanged if it is usable, raise ``ValueError`` otherwise."""
    if not isinstance(p.lam, (int, float)) or isinstance(p.lam, bool):
        raise ValueError("lambda must be a real number")
    if not math.isfinite(p.lam):
        raise ValueError("lambda must be finite")
    if p.lam <= 0:
        raise ValueError("lambda must be positive")
    if not isinstance(p.kappa, int) or isinstance(p.kappa, bool):
        raise ValueError("kappa must be an integer")
    if p.kappa < 1:
        raise ValueError("kappa must be at least 1")
    return p


@dataclass(frozen=True)
class StepRecord:
    """One admission step: attempts in the inter-admission interval, and its length.

    ``attempts`` counts every arrival in the half-open interval ending at the
    admission, the admitted one included, so it is always >= 1.  ``gap`` is the
    time since the previous admission (measured from 0 for the first step).
    """

    attempts: int
    gap: float

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempts must be at least 1")
        if not self.gap > 0:
            raise ValueError("gap must be positive")


@dataclass(frozen=True)
class HistoryWindow:
    """State of the admission chain: the kappa-1 most recent gaps.

    ``admitted`` is the number of real admissions preceding the step about to
    be sampled, capped at kappa.  It gates the blocking formulas during the
    bootstrap phase: residual blocking needs kappa live residents, and the
    m-th busy-channel term needs the m-th most recent admission to exist.
    Once ``admitted == kappa`` the window behaves exactly like the saturated
    chain state.  The cap is sound because no formula looks further back than
    kappa admissions.

    For kappa = 1 the window is empty and ``admitted`` alone distinguishes the
    very first step (no resident, no blocking) from the steady regime (the
    previous admission blocks the single channel for one unit).
    """

    gaps: tuple[float, ...]
    admitted: int

    def __post_init__(self) -> None:
        if any(not (g > 0) for g in self.gaps):
            raise ValueError("history gaps must be positive")
        if self.admitted < 0:
            raise ValueError("admitted must be non-negative")

    @staticmethod
    def bootstrap(kappa: int) -> "HistoryWindow":
        """Window of an empty system: sentinel gaps, nothing admitted yet."""
        return HistoryWindow(gaps=(SENTINEL_GAP,) * (kappa - 1), admitted=0)

    @staticmethod
    def saturated(gaps: tuple[float, ...]) -> "HistoryWindow":
        """Window deep inside a run, where every slot is a real gap."""
        return HistoryWindow(gaps=tuple(float(g) for g in gaps), admitted=len(gaps) + 1)

    @property
    def kappa(self) -> int:
        return len(self.gaps) + 1

    def advance(self, gap: float) -> "HistoryWindow":
        """Shift the window by one step: drop the oldest gap, append ``gap``."""
        new_gaps = self.gaps[1:] + (float(gap),) if self.gaps else ()
        return HistoryWindow(gaps=new_gaps, admitted=min(self.admitted + 1, self.kappa))


@dataclass(frozen=True)
class Counts:
    """Counting processes at the simulation horizon.

    ``potential_successes`` is the number of admissions (meaningful for ALOHA,
    where an admission may later be destroyed; for CSMA it equals
    ``successes_total`` and is kept for uniformity).
    """

    attempts_total: int
    successes_total: int
    potential_successes: int


class RandomSource:
    """Seedable random stream with reproducible, independent sub-streams.

    Identical (seed, stream) pairs reproduce draws bit for bit; distinct
    stream ids give statistically independent generators.  One instance per
    run, never shared.
    """

    def __init__(self, seed: int, stream: int = 0) -> None:
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        )

    def exponential(self, rate: float) -> float:
        return float(self._gen.exponential(1.0 / rate))

    def exponential_block(self, rate: float, n: int) -> np.ndarray:
        return self._gen.exponential(1.0 / rate, size=n)

    def poisson(self, mean: float) -> int:
        return int(self._gen.poisson(mean))

    def pick_channel(self, kappa: int) -> int:
        return int(self._gen.integers(0, kappa))

    def channel_block(self, kappa: int, n: int) -> np.ndarray:
        return self._gen.integers(0, kappa, size=n)

    def uniform(self) -> float:
        return float(self._gen.random())


def format_gap(value: float) -> str:
    """Render a gap at 17 significant digits, enough to round-trip a double."""
    return "%.17g" % value


def steps_to_csv_lines(records: list[StepRecord]) -> list[str]:
    """Serialize step records to the ``index,attempts,gap`` schema."""
    lines = ["index,attempts,gap"]
    for i, r in enumerate(records):
        lines.append(f"{i},{r.attempts},{format_gap(r.gap)}")
    return lines


def steps_from_csv_lines(lines: list[str]) -> list[StepRecord]:
    """Parse the ``index,attempts,gap`` schema, ignoring comment lines."""
    out: list[StepRecord] = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("index"):
            continue
        _idx, attempts, gap = line.split(",")
        out.append(StepRecord(attempts=int(attempts), gap=float(gap)))
    return out
