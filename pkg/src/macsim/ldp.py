"""Numerical large-deviation machinery for the pair (attempts, successes).

Computation chain:

  tilt_reduce   tilting the admission kernel by exp(A*k + B*s) at intensity
                lambda equals a pure attempt tilt (D, 0) at the shifted
                intensity lambda - B; the spectral code only ever discretizes
                reduced tilts unless asked otherwise.
  discretize    k-resolved bin masses of the kernel on a grid; verification
                artifact for row sums and the per-entry tilt identity.
  lambda_cgf    log spectral radius of the tilted transfer operator over the
                clipped window space: the growth rate of tilted expectations.
  rate_J        its Legendre transform, by coordinate ascent over the tilts.
  rate_I        renewal-inverted J for the time-normalized pair.
  rate_IS       contraction of rate_I over the attempt coordinate.
  rate_IA       closed-form Poisson rate for attempts alone.
  tail_bound_check   Monte-Carlo decay rate of a lower tail vs the numerics.

State space.  The kernel sees the gap window only through [1 - sum]_+ and
through which partial sums of recent gaps stay below 1, so any gap >= 1 acts
exactly like 1.  The operator state space therefore clips gaps at 1: bins of
width h over [0, 1) plus one absorbing cell [1, inf).  The clipping is exact;
the only discretization error is the within-bin midpoint representative.
Row masses are integrated in closed form per constant-blocking piece (the
integrand is an exponential on each piece once attempts are summed out), so
untilted rows are stochastic to float precision, and the attempt tilt is
summed analytically over all k with no truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .core import HistoryWindow, Params, ProtocolKind, RandomSource, validate_params
from .event_sim import success_count
from .kernel import blocking_profile
from .numerics import (PowerIterationError, gauss_nodes, golden_max, golden_min,
                       log_exp_integral, power_iteration)

__all__ = [
    "GridSpec",
    "TiltedKernelSpec",
    "DiscretizedKernel",
    "RatePoint",
    "TailBoundReport",
    "PowerIterationError",
    "default_grid",
    "tilt_reduce",
    "discretize",
    "tilted_entries",
    "lambda_cgf",
    "rate_J",
    "rate_I",
    "rate_IS",
    "rate_IA",
    "tail_bound_check",
]

_A_BOX = 50.0
_U_BOX = 30.0


@dataclass(frozen=True)
class GridSpec:
    """Discretization parameters.

    ``h`` is the gap-bin width (1/h should be an integer).  ``s_max`` and
    ``k_max`` bound the k-resolved verification kernel; left as None they are
    sized so the neglected exponential tail is below 1e-10 and the neglected
    Poisson(2*lambda) attempt tail below 1e-12.  The spectral path needs
    neither bound: it lumps every gap beyond 1 into the absorbing cell and
    sums the attempt tilt in closed form.
    """

    h: float = 0.005
    s_max: float | None = None
    k_max: int | None = None
    quad_nodes: int = 12

    def __post_init__(self) -> None:
        if not 0.0 < self.h <= 0.5:
            raise ValueError("h must lie in (0, 0.5]")
        if abs(round(1.0 / self.h) - 1.0 / self.h) > 1e-9:
            raise ValueError("1/h must be an integer")

    def resolved_s_max(self, lam: float) -> float:
        return self.s_max if self.s_max is not None else 1.0 + 24.0 / lam

    def resolved_k_max(self, lam: float) -> int:
        if self.k_max is not None:
            return self.k_max
        return int(stats.poisson.isf(1e-12, 2.0 * lam)) + 2


def default_grid(kappa: int) -> GridSpec:
    """Module default: h = 0.005, coarsened to 0.02 for the kappa = 3 tensor."""
    return GridSpec(h=0.02 if kappa >= 3 else 0.005)


@dataclass(frozen=True)
class TiltedKernelSpec:
    """Exponential tilt exp(A*attempts + B*gap) of one protocol's kernel."""

    A: float
    B: float
    protocol: ProtocolKind
    params: Params

    def __post_init__(self) -> None:
        validate_params(self.params)
        if not self.B < self.params.lam:
            raise ValueError("B must be strictly less than lambda")


def tilt_reduce(spec: TiltedKernelSpec) -> tuple[float, float]:
    """Collapse a (A, B) tilt into a pure attempt tilt at shifted intensity.

    Returns (D, lambda - B) with D = A + log(lambda / (lambda - B)).  The
    identity is pointwise: exp(A*k + B*s) times the kernel density at
    intensity lambda equals exp(D*k) times the density at intensity
    lambda - B, for every window, k and s.
    """
    lam = spec.params.lam
    if not spec.B < lam:
        raise ValueError("B must be strictly less than lambda")
    return spec.A + math.log(lam / (lam - spec.B)), lam - spec.B


# ---------------------------------------------------------------------------
# state space


def _column_layout(h: float):
    """Edges, representatives and count of the clipped gap bins."""
    nreg = int(round(1.0 / h))
    edges = np.linspace(0.0, 1.0, nreg + 1)
    reps = np.append((edges[:-1] + edges[1:]) / 2.0, 1.0)
    return edges, reps, nreg + 1


def _state_windows(kappa: int, reps: np.ndarray) -> list[HistoryWindow]:
    """Saturated windows for every point of the clipped product grid."""
    if kappa == 1:
        return [HistoryWindow.saturated(())]
    n = len(reps)
    out = []
    for idx in np.ndindex(*([n] * (kappa - 1))):
        out.append(HistoryWindow.saturated(tuple(float(reps[i]) for i in idx)))
    return out


# ---------------------------------------------------------------------------
# k-resolved verification kernel


@dataclass(frozen=True)
class DiscretizedKernel:
    """Bin masses of one protocol kernel, resolved in the attempt count.

    ``entries[state, k-1, col]`` is the mass of {attempts = k, gap in col}
    from the state's window; the last column is the overflow cell
    [s_max, inf).  States enumerate the clipped gap-window product grid.
    Rows sum to one up to the k_max truncation.  This object exists for
    verification (normalization, per-entry tilt identity, sampler checks);
    the spectral path assembles its own contracted operator.
    """

    params: Params
    protocol: ProtocolKind
    grid: GridSpec
    state_windows: list[HistoryWindow]
    sigma_edges: np.ndarray
    k_max: int
    entries: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=(1, 2))


def _piece_bin_masses(lam: float, kappa: int, g: float, pieces, sigma_edges: np.ndarray,
                      k_max: int, nodes: int, A: float = 0.0, B: float = 0.0) -> np.ndarray:
    """Exact-in-s masses of exp(A*k + B*s) * kernel over the sigma bins.

    Returns an array [k_max, n_bins + 1]; the final slot is the tail beyond
    the last edge.  Gauss-Legendre per (piece, bin) overlap; the integrand is
    a degree-(k-1) polynomial times an exponential on each piece, so modest
    node counts are exact to float precision.
    """
    n_bins = len(sigma_edges) - 1
    s_max = float(sigma_edges[-1])
    out = np.zeros((k_max, n_bins + 1))
    ks = np.arange(1, k_max + 1)
    lgam = np.array([math.lgamma(k) for k in ks])
    for lo, hi, b, b_lo in pieces:
        thin = 1.0 - b / kappa
        if thin <= 0.0:
            continue
        log_thin = math.log(thin)
        hi_fin = min(hi, s_max)
        if hi_fin > lo:
            uu = np.clip(sigma_edges[:-1], lo, hi_fin)
            vv = np.clip(sigma_edges[1:], lo, hi_fin)
            for j in np.flatnonzero(vv > uu):
                xs, ws = gauss_nodes(float(uu[j]), float(vv[j]), nodes)
                clin = lam * (g + (b_lo + b * (xs - lo)) / kappa)
                with np.errstate(divide="ignore", invalid="ignore"):
                    kpow = (ks[:, None] - 1) * np.log(clin)[None, :]
                kpow[0, :] = 0.0  # 0^0 = 1: one attempt needs no prior arrivals
                logw = (
                    kpow
                    - lgam[:, None]
                    + math.log(lam) + log_thin
                    + (A * ks)[:, None]
                    + ((B - lam) * xs)[None, :]
                )
                out[:, j] += np.exp(logw) @ ws
        if math.isinf(hi):
            # beyond every blocking threshold: b = 0, constant coefficient,
            # pure exponential, closed form
            u0 = max(lo, s_max)
            ctot = lam * (g + b_lo / kappa)
            with np.errstate(divide="ignore", invalid="ignore"):
                kpow_t = (ks - 1.0) * (math.log(ctot) if ctot > 0 else -math.inf)
            kpow_t[0] = 0.0
            logtail = (
                kpow_t
                - lgam
                + math.log(lam) + log_thin
                + A * ks
                + (B - lam) * u0
                - math.log(lam - B)
            )
            out[:, n_bins] += np.exp(logtail)
    return out


def discretize(p: Params, proto: ProtocolKind, grid: GridSpec | None = None) -> DiscretizedKernel:
    """Materialize k-resolved bin masses for every window on the grid."""
    validate_params(p)
    grid = grid if grid is not None else default_grid(p.kappa)
    lam = p.lam
    s_max = grid.resolved_s_max(lam)
    if not s_max > 1.0:
        raise ValueError("s_max must exceed 1")
    k_max = grid.resolved_k_max(lam)
    _, reps, _ = _column_layout(grid.h)
    windows = _state_windows(p.kappa, reps)
    n_sig = int(round(s_max / grid.h))
    sigma_edges = np.linspace(0.0, n_sig * grid.h, n_sig + 1)
    entries = np.zeros((len(windows), k_max, n_sig + 1))
    for i, w in enumerate(windows):
        g, pieces = blocking_profile(w)
        if proto is ProtocolKind.CSMA:
            pieces = [(g, math.inf, 0, 0.0)]
        entries[i] = _piece_bin_masses(lam, p.kappa, g, pieces, sigma_edges,
                                       k_max, grid.quad_nodes)
    return DiscretizedKernel(params=p, protocol=proto, grid=grid,
                             state_windows=windows, sigma_edges=sigma_edges,
                             k_max=k_max, entries=entries)


def tilted_entries(dk: DiscretizedKernel, A: float, B: float) -> np.ndarray:
    """Entrywise-exact masses of the (A, B)-tilted kernel on ``dk``'s layout.

    Same nodes, same pieces, the tilt applied inside the integral; used to
    verify the reduction identity entry by entry.
    """
    if not B < dk.params.lam:
        raise ValueError("B must be strictly less than lambda")
    out = np.zeros_like(dk.entries)
    for i, w in enumerate(dk.state_windows):
        g, pieces = blocking_profile(w)
        if dk.protocol is ProtocolKind.CSMA:
            pieces = [(g, math.inf, 0, 0.0)]
        out[i] = _piece_bin_masses(dk.params.lam, dk.params.kappa, g, pieces,
                                   dk.sigma_edges, dk.k_max, dk.grid.quad_nodes,
                                   A=A, B=B)
    return out


# ---------------------------------------------------------------------------
# spectral path


@lru_cache(maxsize=32)
def _operator_geometry(proto: ProtocolKind, kappa: int, h: float):
    """Tilt-independent piece layout of every grid state, as padded arrays.

    Blocking profiles depend only on the window, so they are computed once
    per (protocol, kappa, h) and reused by every operator assembly.  Pieces
    are padded to a common slot count with zero-width dummies.
    """
    edges, reps, cols = _column_layout(h)
    windows = _state_windows(kappa, reps)
    n = len(windows)
    profs = []
    nslots = 1
    for w in windows:
        g, pieces = blocking_profile(w)
        if proto is ProtocolKind.CSMA:
            pieces = [(g, math.inf, 0, 0.0)]
        pieces = [pc for pc in pieces if pc[2] < kappa]  # fully blocked: no mass
        profs.append((g, pieces))
        nslots = max(nslots, len(pieces))
    gam = np.array([g for g, _ in profs])
    lo = np.zeros((nslots, n))
    hi = np.zeros((nslots, n))
    bb = np.zeros((nslots, n))
    blo = np.zeros((nslots, n))
    for i, (_g, pieces) in enumerate(profs):
        for j, (plo, phi, pb, pblo) in enumerate(pieces):
            lo[j, i], hi[j, i], bb[j, i], blo[j, i] = plo, phi, pb, pblo
    return edges, gam, lo, hi, bb, blo, cols


def _log_contracted_rows(proto: ProtocolKind, p: Params, pref: float, amp: float,
                         lam_eff: float, drift: float, h: float) -> np.ndarray:
    """Log masses of the attempt-contracted tilted operator, one row per state.

    On each constant-blocking piece the attempt sum telescopes into a single
    exponential of s, so every bin mass has the closed form
    C * (exp(c*v) - exp(c*u)) / c; the tail cell integrates to the same form
    with v = inf.  ``amp`` carries the attempt tilt, ``drift`` the gap tilt
    net of the intensity.
    """
    kappa = p.kappa
    edges, gam, lo, hi, bb, blo, cols = _operator_geometry(proto, kappa, h)
    n = gam.shape[0]
    logm = np.full((n, cols), -np.inf)
    u_edges = edges[:-1]
    v_edges = edges[1:]
    for sl in range(lo.shape[0]):
        l_, h_, b_, bl_ = lo[sl], hi[sl], bb[sl], blo[sl]
        thin = 1.0 - b_ / kappa  # always positive: at most kappa-1 can block
        logc0 = pref + np.log(thin) + lam_eff * (gam + (bl_ - b_ * l_) / kappa) * amp
        c = lam_eff * amp * b_ / kappa + drift
        hi_fin = np.minimum(h_, 1.0)
        uu = np.clip(u_edges[None, :], l_[:, None], hi_fin[:, None])
        vv = np.clip(v_edges[None, :], l_[:, None], hi_fin[:, None])
        mask = vv > uu
        if mask.any():
            vals = logc0[:, None] + log_exp_integral(
                c[:, None], np.where(mask, uu, 0.0), np.where(mask, vv, 1.0))
            logm[:, :-1] = np.logaddexp(logm[:, :-1], np.where(mask, vals, -np.inf))
        tl = np.isinf(h_)
        if tl.any():
            # b = 0 beyond the last threshold, so c = drift < 0 there
            u0 = np.maximum(l_, 1.0)
            cm = np.where(tl, c, -1.0)
            logtail = np.where(tl, logc0 + cm * u0 - np.log(-cm), -np.inf)
            logm[:, -1] = np.logaddexp(logm[:, -1], logtail)
    return logm


def _lambda_cgf_vec(spec: TiltedKernelSpec, grid: GridSpec | None, reduce: bool,
                    tol: float, max_iter: int,
                    v0: np.ndarray | None = None) -> tuple[float, np.ndarray | None]:
    """lambda_cgf plus the converged eigenvector, for warm-started sweeps."""
    p = spec.params
    if p.kappa > 3:
        raise ValueError("spectral computations support kappa <= 3")
    grid = grid if grid is not None else default_grid(p.kappa)
    if reduce:
        d, lam_eff = tilt_reduce(spec)
        pref = d + math.log(lam_eff)
        amp = math.exp(d)
        drift = -lam_eff
    else:
        lam_eff = p.lam
        pref = spec.A + math.log(lam_eff)
        amp = math.exp(spec.A)
        drift = spec.B - p.lam
    logm = _log_contracted_rows(spec.protocol, p, pref, amp, lam_eff, drift, grid.h)

    if p.kappa == 1:
        row = logm[0]
        m = row.max()
        return float(m + math.log(np.exp(row - m).sum())), None

    s0 = float(logm.max())
    q = np.exp(logm - s0)
    cols = logm.shape[1]
    # extreme tilts can underflow whole rows of q; a diagonal shift keeps the
    # iterate alive and moves the Perron root by exactly eps, far below tol
    eps = 1e-280
    if p.kappa == 2:
        def matvec(v: np.ndarray) -> np.ndarray:
            return v @ q + eps * v
    else:
        qt = q.reshape(cols, cols, cols)

        def matvec(v: np.ndarray) -> np.ndarray:
            return np.einsum("ij,ijk->jk", v.reshape(cols, cols), qt).ravel() + eps * v

    start = v0 if v0 is not None and v0.shape == (cols ** (p.kappa - 1),) \
        else np.full(cols ** (p.kappa - 1), 1.0)
    rho, vec = power_iteration(matvec, start, tol=tol, max_iter=max_iter)
    return float(s0 + math.log(rho)), vec


def lambda_cgf(spec: TiltedKernelSpec, grid: GridSpec | None = None, *,
               reduce: bool = True, tol: float = 1e-10, max_iter: int = 10 ** 5) -> float:
    """Growth rate of tilted chain expectations: log spectral radius of the
    tilted transfer operator.

    With ``reduce`` (the default) only the attempt tilt (D, 0) at the shifted
    intensity is ever discretized; ``reduce=False`` assembles the raw (A, B)
    tilt instead and exists to verify that both routes agree.
    """
    return _lambda_cgf_vec(spec, grid, reduce, tol, max_iter)[0]


# ---------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True)
class RatePoint:
    """One evaluation of a rate function: where, the value, and any caveat."""

    location: tuple
    value: float
    protocol: ProtocolKind
    note: str = ""


def _ascend(x: float, y: float, proto: ProtocolKind, p: Params, grid: GridSpec,
            tol: float, start: tuple[float, float] | None,
            max_sweeps: int) -> tuple[float, float, float]:
    """Coordinate ascent for sup_{A, B} [A*x + B*y - Lambda]; returns
    (value, A, u) with B = lambda - exp(u)."""
    lam = p.lam
    hold: dict[str, np.ndarray | None] = {"v": None}

    def objective(a_val: float, u_val: float) -> float:
        b_val = lam - math.exp(u_val)
        spec = TiltedKernelSpec(A=a_val, B=b_val, protocol=proto, params=p)
        val, vec = _lambda_cgf_vec(spec, grid, True, 1e-10, 10 ** 5, hold["v"])
        hold["v"] = vec
        return a_val * x + b_val * y - val

    def line_max(f, center: float, box: float) -> tuple[float, float]:
        # the objective is unimodal along each coordinate, so an interior
        # maximum of a local bracket is the global one; widen only on edge
        # contact
        lo, hi = max(-box, center - 2.0), min(box, center + 2.0)
        x_opt, v_opt = golden_max(f, lo, hi, tol=1e-5)
        if min(x_opt - lo, hi - x_opt) > 1e-3 or (lo == -box and hi == box):
            return x_opt, v_opt
        return golden_max(f, -box, box, tol=1e-5)

    a_cur, u_cur = start if start is not None else (0.0, math.log(lam))
    a_cur = min(max(a_cur, -_A_BOX), _A_BOX)
    u_cur = min(max(u_cur, -_U_BOX), _U_BOX)
    best = objective(a_cur, u_cur)
    for _ in range(max_sweeps):
        a_cur, _v = line_max(lambda t: objective(t, u_cur), a_cur, _A_BOX)
        u_cur, val = line_max(lambda t: objective(a_cur, t), u_cur, _U_BOX)
        if val - best <= tol:
            best = max(best, val)
            break
        best = val
    return best, a_cur, u_cur


def rate_J(x: float, y: float, proto: ProtocolKind, p: Params,
           grid: GridSpec | None = None, tol: float = 1e-6,
           start: tuple[float, float] | None = None,
           max_sweeps: int = 60) -> RatePoint:
    """Legendre transform sup_{A, B < lambda} [A*x + B*y - Lambda(A, B)].

    Concave maximization by coordinate ascent on (A, u) with B = lambda -
    exp(u), golden-section line searches per coordinate, value tolerance
    ``tol``.  Points with x < 1 are outside the effective domain (every step
    has at least one attempt) and report +inf instead of searching.
    """
    validate_params(p)
    if not y > 0:
        raise ValueError("y must be positive")
    if x < 1.0:
        return RatePoint(location=(x, y), value=math.inf, protocol=proto,
                         note="outside effective domain: attempts mean below 1")
    grid = grid if grid is not None else default_grid(p.kappa)
    best, a_cur, u_cur = _ascend(x, y, proto, p, grid, tol, start, max_sweeps)
    note = ""
    if _A_BOX - abs(a_cur) < 1e-3 or _U_BOX - abs(u_cur) < 1e-3:
        note = "effective-domain edge: tilt search hit its box"
    return RatePoint(location=(x, y), value=float(best), protocol=proto, note=note)


def _scaling(proto: ProtocolKind, a: float, s: float) -> tuple[float, float, float]:
    """Renewal inversion: weight u and the J arguments (x, y) for (a, s)."""
    u = s if proto is ProtocolKind.CSMA else 0.5 * (a + s)
    return u, a / u, 1.0 / u


def rate_I(a: float, s: float, proto: ProtocolKind, p: Params,
           grid: GridSpec | None = None) -> RatePoint:
    """Rate for (attempts/t, successes/t) ~ (a, s): the time-scaled J.

    CSMA counts one success per admission step, so the pair over time t is
    s*t steps long; ALOHA's success reconstruction makes it (a+s)/2*t steps.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not s > 0:
        raise ValueError("s must be positive")
    u, x, y = _scaling(proto, a, s)
    rp = rate_J(x, y, proto, p, grid)
    value = u * rp.value if math.isfinite(rp.value) else math.inf
    return RatePoint(location=(a, s), value=value, protocol=proto, note=rp.note)


def rate_IS(s: float, proto: ProtocolKind, p: Params,
            grid: GridSpec | None = None) -> RatePoint:
    """Rate for successes/t ~ s alone: infimum of rate_I over the attempt rate.

    Scans a geometric grid of attempt rates above s (the effective domain
    needs at least one attempt per success step), then golden-section on the
    bracketing interval.  Consecutive evaluations warm-start the inner tilt
    ascent with the previous optimum.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    validate_params(p)
    grid = grid if grid is not None else default_grid(p.kappa)
    warm: dict[str, tuple[float, float] | None] = {"pt": None}

    def value_at(a: float) -> float:
        u, x, y = _scaling(proto, a, s)
        if x < 1.0 or y <= 0.0:
            return math.inf
        val, a_opt, u_opt = _ascend(x, y, proto, p, grid, 1e-6, warm["pt"], 60)
        if math.isfinite(val):
            warm["pt"] = (a_opt, u_opt)
        return u * val if math.isfinite(val) else math.inf

    qs = np.geomspace(1e-3, 32.0, 9)
    avals = [s * (1.0 + q) for q in qs]
    vals = [value_at(a) for a in avals]
    finite = [i for i, v in enumerate(vals) if math.isfinite(v)]
    if not finite:
        return RatePoint(location=(s,), value=math.inf, protocol=proto,
                         note="no finite values on the attempt-rate scan")
    i_best = min(finite, key=lambda i: vals[i])
    lo = avals[max(i_best - 1, 0)] if i_best > 0 else s * (1.0 + 1e-9)
    hi = avals[min(i_best + 1, len(avals) - 1)]
    if i_best == len(avals) - 1:
        # descending at the top of the scan: extend until the value turns
        a_ext, v_prev = avals[-1], vals[-1]
        for _ in range(20):
            a_try = a_ext * 2.0
            v_try = value_at(a_try)
            if not math.isfinite(v_try) or v_try >= v_prev:
                hi = a_try
                break
            lo, a_ext, v_prev = a_ext, a_try, v_try
        else:
            hi = a_ext
    a_star, v_star = golden_min(value_at, lo, hi, tol=max(1e-6, 2e-4 * s))
    return RatePoint(location=(s,), value=float(v_star), protocol=proto,
                     note=f"attempt rate at the infimum: {a_star:.6g}")


def rate_IA(a: float, p: Params) -> RatePoint:
    """Rate for attempts/t ~ a: the Poisson stream's own rate function."""
    validate_params(p)
    if not a > 0:
        raise ValueError("a must be positive")
    lam = p.lam
    value = lam - a + a * math.log(a / lam)
    return RatePoint(location=(a,), value=float(value), protocol=ProtocolKind.ALOHA,
                     note="protocol-independent")


@dataclass(frozen=True)
class TailBoundReport:
    """Monte-Carlo lower-tail estimate against the numeric rate bound."""

    runs: int
    hits: int
    cutoff: int
    t: float
    s_target: float
    mc_rate: float
    predicted_rate: float
    sufficient: bool
    passed: bool | None
    detail: str


def tail_bound_check(proto: ProtocolKind, p: Params, s_target: float, t: float,
                     runs: int, src: RandomSource, workers: int = 1) -> TailBoundReport:
    """Estimate -log P(S(t) <= s_target * t) / t by Monte Carlo and compare
    with the numeric rate (decay at least as fast as the bound predicts).

    Runs use independent sub-streams of ``src`` so fan-out across workers
    cannot change the result.  Fewer than 10 occurrences of the tail event
    make the estimate meaningless; the report then says so instead of
    passing or failing.
    """
    validate_params(p)
    if not 0 < s_target:
        raise ValueError("s_target must be positive")
    if not t > 0:
        raise ValueError("t must be positive")
    cutoff = int(math.floor(s_target * t))
    hits = _tail_hits(proto, p, t, cutoff, runs, src, workers)

    # the rate is decreasing below the typical throughput, but scan a few
    # points rather than assume it
    svals = np.linspace(s_target / 4.0, s_target, 4)
    predicted = min(rate_IS(float(sv), proto, p).value for sv in svals)

    if hits < 10:
        detail = (f"insufficient runs: {hits} occurrences of S(t) <= {cutoff} in {runs} runs; "
                  f"need at least 10 for a usable estimate "
                  f"(predicted probability ~ exp(-{predicted * t:.1f}))")
        return TailBoundReport(runs=runs, hits=hits, cutoff=cutoff, t=t,
                               s_target=s_target, mc_rate=math.inf,
                               predicted_rate=predicted, sufficient=False,
                               passed=None, detail=detail)
    mc_rate = -math.log(hits / runs) / t
    passed = mc_rate >= 0.9 * predicted
    detail = (f"MC rate {mc_rate:.4f} from {hits}/{runs} hits vs predicted {predicted:.4f}; "
              f"{'consistent with' if passed else 'slower than'} the upper bound")
    return TailBoundReport(runs=runs, hits=hits, cutoff=cutoff, t=t,
                           s_target=s_target, mc_rate=mc_rate,
                           predicted_rate=predicted, sufficient=True,
                           passed=passed, detail=detail)


def _tail_chunk(args) -> int:
    proto, p, t, cutoff, seed, stream_lo, stream_hi = args
    hits = 0
    for i in range(stream_lo, stream_hi):
        run_src = RandomSource(seed, stream=i)
        if success_count(p, proto, run_src, t, stop_above=cutoff) <= cutoff:
            hits += 1
    return hits


def _tail_hits(proto: ProtocolKind, p: Params, t: float, cutoff: int, runs: int,
               src: RandomSource, workers: int) -> int:
    base = src.stream * (10 ** 6) + 1
    if workers <= 1:
        return _tail_chunk((proto, p, t, cutoff, src.seed, base, base + runs))
    from concurrent.futures import ProcessPoolExecutor

    chunk = (runs + workers - 1) // workers
    jobs = []
    lo = base
    while lo < base + runs:
        hi = min(lo + chunk, base + runs)
        jobs.append((proto, p, t, cutoff, src.seed, lo, hi))
        lo = hi
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return sum(ex.map(_tail_chunk, jobs))
