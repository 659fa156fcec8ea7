"""Estimators over admission records, string measures, an ergodicity probe.

The sampler and the event simulator both reduce a run to a sequence of
(attempts, gap) steps.  This module turns such sequences back into counting
processes at a time horizon, into long-run throughput and mean estimates,
and into empirical string measures: normalized histograms of sliding
kappa-windows over a product bin grid, the raw material for rate-function
estimation.  A separate diagnostic composes the discretized kernel kappa+1
times and checks the density-ratio bound behind uniform ergodicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .core import Counts, Params, ProtocolKind, StepRecord, validate_params
from .kernel import blocking_profile
from .ldp import (
    GridSpec,
    _column_layout,
    _log_contracted_rows,
    _piece_bin_masses,
    _state_windows,
)

__all__ = [
    "EmpiricalStringMeasure",
    "attempts_bracket",
    "build_string_measure",
    "default_measure_grid",
    "ergodicity_ratio_diagnostic",
    "lln_throughput",
    "measure_from_csv_lines",
    "measure_to_csv_lines",
    "pi_means",
    "reconstruct_counts",
]


def _step_arrays(records: Sequence[StepRecord]) -> tuple[np.ndarray, np.ndarray]:
    n = len(records)
    atts = np.fromiter((r.attempts for r in records), dtype=float, count=n)
    gaps = np.fromiter((r.gap for r in records), dtype=float, count=n)
    return atts, gaps


def _admissions_by(gaps: np.ndarray, t: float) -> tuple[int, np.ndarray]:
    """Number of admission instants at or before ``t``, plus the cumsum."""
    total = float(gaps.sum())
    if total < t:
        raise ValueError(
            f"records span {total:.6g} time units, "
            f"{t - total:.6g} short of the horizon t={t:.6g}"
        )
    cum = np.cumsum(gaps)
    return int(np.searchsorted(cum, t, side="right")), cum


def reconstruct_counts(records: Sequence[StepRecord], proto: ProtocolKind,
                       t: float) -> Counts:
    """Counting processes at time ``t``, rebuilt from admission records alone.

    CSMA admissions all complete, so successes equal admissions.  For ALOHA
    every attempt beyond the admitted one is debited against one admission;
    this undercounts deliveries whenever two late attempts hit the same
    resident, and the result is clamped at zero for short stretches where
    the debits exceed the admissions.  Attempts are reported as the lower
    end of ``attempts_bracket``: arrivals inside the step in progress at
    ``t`` have left no record yet.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    atts, gaps = _step_arrays(records)
    admitted, _ = _admissions_by(gaps, t)
    att_low = int(atts[:admitted].sum())
    if proto is ProtocolKind.CSMA:
        succ = admitted
    else:
        succ = max(0, 2 * admitted - att_low)
    return Counts(attempts_total=att_low, successes_total=succ,
                  potential_successes=admitted)


def attempts_bracket(records: Sequence[StepRecord], t: float) -> tuple[int, int]:
    """Envelope (lower, upper) for the arrivals by time ``t``.

    Records show attempts only at admission instants.  The step in progress
    at ``t`` has logged nothing, yet all but the admitted one of its
    eventual attempts may already have arrived; the upper end adds them
    back.  The ends coincide when ``t`` is itself an admission instant or
    the records stop exactly at ``t``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    atts, gaps = _step_arrays(records)
    admitted, cum = _admissions_by(gaps, t)
    lower = int(atts[:admitted].sum())
    start = float(cum[admitted - 1]) if admitted else 0.0
    if admitted < len(records) and t > start:
        return lower, lower + int(atts[admitted]) - 1
    return lower, lower


def lln_throughput(records: Sequence[StepRecord], proto: ProtocolKind) -> float:
    """Plug-in long-run success rate of an admission sequence.

    CSMA: records per unit time.  ALOHA: the same debit rule as
    ``reconstruct_counts``, (2n - total attempts) / total time, returned
    raw; it can undershoot the delivered rate of a full event run, and on
    collision-heavy stretches it can even go negative.
    """
    if not records:
        raise ValueError("need at least one record")
    atts, gaps = _step_arrays(records)
    total = float(gaps.sum())
    n = len(records)
    if proto is ProtocolKind.CSMA:
        return n / total
    return (2.0 * n - float(atts.sum())) / total


def pi_means(records: Sequence[StepRecord]) -> tuple[float, float]:
    """Sample means (attempts, gap) over the records."""
    if not records:
        raise ValueError("need at least one record")
    atts, gaps = _step_arrays(records)
    return float(atts.mean()), float(gaps.mean())


# ---------------------------------------------------------------------------
# string measures


@dataclass(frozen=True)
class EmpiricalStringMeasure:
    """Normalized histogram of kappa-long windows of (attempt, gap) bins.

    Cells are kappa-tuples of (attempt bin, gap bin) index pairs.  Attempt
    bins are attempts-1 capped at k_max-1, the last bin absorbing; gap bins
    have width h over [0, s_max), with index n_sigma_bins for the overflow
    cell past s_max.  ``n`` counts the records behind the histogram and
    ``sigma_overflow`` how many of them spilled past s_max.
    """

    kappa: int
    h: float
    s_max: float
    k_max: int
    n: int
    sigma_overflow: int
    weights: dict[tuple[tuple[int, int], ...], float]

    @property
    def n_sigma_bins(self) -> int:
        return int(round(self.s_max / self.h))

    def total_weight(self) -> float:
        return float(sum(self.weights.values()))

    def marginal_defect(self) -> float:
        """Total-variation gap between the leading and trailing projections.

        The two (kappa-1)-window projections of a sliding-window histogram
        differ only through the first and last window of the sample, so the
        defect is at most 2*kappa/n; for a stationary source both estimate
        the same law.
        """
        if self.kappa == 1:
            return 0.0
        lead: dict[tuple, float] = {}
        trail: dict[tuple, float] = {}
        for key, w in self.weights.items():
            head, tail = key[:-1], key[1:]
            lead[head] = lead.get(head, 0.0) + w
            trail[tail] = trail.get(tail, 0.0) + w
        cells = lead.keys() | trail.keys()
        return 0.5 * sum(abs(lead.get(c, 0.0) - trail.get(c, 0.0)) for c in cells)


def default_measure_grid(lam: float) -> GridSpec:
    """Measure grid sized to the intensity: gaps to 1 + 20/lambda, attempts
    to the 1e-10 tail of Poisson(2*lambda)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    k_max = int(stats.poisson.isf(1e-10, 2.0 * lam)) + 2
    return GridSpec(h=0.01, s_max=1.0 + 20.0 / lam, k_max=k_max)


def build_string_measure(records: Sequence[StepRecord], kappa: int,
                         grid: GridSpec) -> EmpiricalStringMeasure:
    """Histogram of all n - kappa + 1 sliding windows, renormalized.

    Windows overlap rather than tile, which is what keeps the two marginal
    projections within 2*kappa/n of each other.  ``grid`` must carry
    explicit s_max and k_max; s_max is rounded up to a whole number of bins.
    """
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    n = len(records)
    if n < kappa:
        raise ValueError(f"need at least kappa={kappa} records, got {n}")
    if grid.s_max is None or grid.k_max is None:
        raise ValueError("string measures need explicit s_max and k_max")
    nb = int(math.ceil(grid.s_max / grid.h - 1e-9))
    s_max = nb * grid.h
    k_max = int(grid.k_max)
    atts, gaps = _step_arrays(records)
    a_idx = np.minimum(atts.astype(np.int64), k_max) - 1
    s_idx = np.minimum((gaps / grid.h).astype(np.int64), nb)
    overflow = int(np.count_nonzero(s_idx == nb))
    pairs = list(zip(a_idx.tolist(), s_idx.tolist()))
    m = n - kappa + 1
    w = 1.0 / m
    weights: dict[tuple[tuple[int, int], ...], float] = {}
    for i in range(m):
        key = tuple(pairs[i:i + kappa])
        weights[key] = weights.get(key, 0.0) + w
    return EmpiricalStringMeasure(kappa=kappa, h=grid.h, s_max=s_max,
                                  k_max=k_max, n=n, sigma_overflow=overflow,
                                  weights=weights)


_MEASURE_TAG = "# string-measure "


def measure_to_csv_lines(m: EmpiricalStringMeasure) -> list[str]:
    """Sparse CSV: one metadata comment, a header, then cell,weight rows.

    Cells serialize as attempt:gap index pairs joined by '|'; rows are
    sorted so equal measures export byte-identically.
    """
    lines = [
        f"{_MEASURE_TAG}kappa={m.kappa} h={m.h:.17g} s_max={m.s_max:.17g} "
        f"k_max={m.k_max} n={m.n} sigma_overflow={m.sigma_overflow}",
        "cell,weight",
    ]
    for key in sorted(m.weights):
        cell = "|".join(f"{a}:{s}" for a, s in key)
        lines.append(f"{cell},{m.weights[key]:.17g}")
    return lines


def measure_from_csv_lines(lines: Iterable[str]) -> EmpiricalStringMeasure:
    """Inverse of ``measure_to_csv_lines``."""
    it = iter(lines)
    meta = next(it, "").strip()
    if not meta.startswith(_MEASURE_TAG):
        raise ValueError("missing string-measure metadata line")
    kv = dict(tok.split("=", 1) for tok in meta[len(_MEASURE_TAG):].split())
    header = next(it, "").strip()
    if header != "cell,weight":
        raise ValueError("missing cell,weight header")
    weights: dict[tuple[tuple[int, int], ...], float] = {}
    for line in it:
        line = line.strip()
        if not line:
            continue
        cell_s, w_s = line.split(",")
        key = tuple(
            (int(a), int(s)) for a, s in (p.split(":") for p in cell_s.split("|"))
        )
        weights[key] = float(w_s)
    return EmpiricalStringMeasure(
        kappa=int(kv["kappa"]), h=float(kv["h"]), s_max=float(kv["s_max"]),
        k_max=int(kv["k_max"]), n=int(kv["n"]),
        sigma_overflow=int(kv["sigma_overflow"]), weights=weights)


# ---------------------------------------------------------------------------
# ergodicity probe


def ergodicity_ratio_diagnostic(p: Params, proto: ProtocolKind,
                                grid: GridSpec | None = None) -> float:
    """Worst (kappa+1)-step density ratio over pairs of grid states.

    Composes kappa clipped-window transitions in closed form, resolves step
    kappa+1 jointly in (attempts, gap), and returns the largest cell-mass
    ratio across starting states.  Uniform ergodicity of the admission
    chain rests on this staying at or below exp(lam*kappa); a one percent
    cushion absorbs discretization.  Cells too small to compare reliably
    are skipped.  Cost grows with the 2(kappa-1) power of the bin count,
    hence the kappa cap.
    """
    validate_params(p)
    if p.kappa > 3:
        raise ValueError("ergodicity diagnostic supports kappa <= 3")
    if p.kappa == 1:
        # a single empty window is the whole grid: nothing to compare
        return 1.0
    lam, kappa = p.lam, p.kappa
    if grid is None:
        grid = GridSpec(h=0.04 if kappa == 3 else 0.02)
    logm = _log_contracted_rows(proto, p, math.log(lam), 1.0, lam, -lam, grid.h)
    mrows = np.exp(logm)
    _, reps, cols = _column_layout(grid.h)
    if kappa == 2:
        comp = mrows.copy()
        for _ in range(kappa - 1):
            comp = comp @ mrows
    else:
        # states are (older, newer) gap-bin pairs; a transition keeps the
        # newer coordinate and draws the next one from the matching row
        mt = mrows.reshape(cols, cols, cols)
        nst = cols * cols
        v = np.zeros((nst, cols, cols))
        ii, jj = np.divmod(np.arange(nst), cols)
        v[np.arange(nst), jj, :] = mrows
        for _ in range(kappa - 1):
            v = np.einsum("bij,ijk->bjk", v, mt)
        comp = v.reshape(nst, nst)
    step = 0.05
    n_fin = int(round((1.0 + 6.0 / lam) / step)) + 1
    fin_edges = np.linspace(0.0, n_fin * step, n_fin + 1)
    k_fin = int(stats.poisson.isf(1e-9, 2.0 * lam)) + 2
    windows = _state_windows(kappa, reps)
    fin = np.empty((len(windows), k_fin * (n_fin + 1)))
    for z, w in enumerate(windows):
        g, pieces = blocking_profile(w)
        if proto is ProtocolKind.CSMA:
            pieces = [(g, math.inf, 0, 0.0)]
        fin[z] = _piece_bin_masses(lam, kappa, g, pieces, fin_edges, k_fin,
                                   grid.quad_nodes).ravel()
    joint = comp @ fin
    mx = joint.max(axis=0)
    mn = joint.min(axis=0)
    ok = mn > 1e-250
    if not ok.any():
        raise RuntimeError("no cell carries comparable mass in every row")
    return float(np.max(mx[ok] / mn[ok]))
