"""Small shared numerical routines: golden-section search, guarded grid
maximization, power iteration, stable piecewise-exponential integrals."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class PowerIterationError(RuntimeError):
    """Spectral iteration failed to settle; carries the last residual."""

    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


def golden_min(f, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 400):
    """Golden-section minimum of a unimodal ``f`` on [lo, hi].

    ``tol`` is absolute in the argument.  Returns (argmin, min value).
    """
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    if fc <= fd:
        return c, fc
    return d, fd


def golden_max(f, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 400):
    x, v = golden_min(lambda t: -f(t), lo, hi, tol=tol, max_iter=max_iter)
    return x, -v


def guarded_grid_max(f, lo: float, hi: float, step: float, refine_tol: float,
                     tie_tol: float = 1e-9):
    """Coarse-grid maximum with a separated-maxima guard, then golden refinement.

    The guard protects the unimodality assumption: if two non-adjacent grid
    points both reach the grid maximum within ``tie_tol`` and a strictly lower
    point lies between them, the search refuses to pick one.
    """
    xs = np.arange(lo, hi + 0.5 * step, step)
    xs = xs[xs > 0]
    vals = np.array([f(x) for x in xs])
    i_best = int(np.argmax(vals))
    v_best = vals[i_best]
    near = np.flatnonzero(vals >= v_best - tie_tol)
    for j in near:
        if abs(int(j) - i_best) <= 1:
            continue
        a, b = sorted((int(j), i_best))
        if np.any(vals[a + 1:b] < v_best - tie_tol):
            raise ValueError(
                "two separated grid maxima detected; objective is not unimodal "
                f"(grid points {xs[a]:.6g} and {xs[b]:.6g})"
            )
    a = xs[max(i_best - 1, 0)]
    b = xs[min(i_best + 1, len(xs) - 1)]
    return golden_max(f, a, b, tol=refine_tol)


def power_iteration(matvec, v0: np.ndarray, tol: float = 1e-10, max_iter: int = 10 ** 5):
    """Dominant eigenvalue of a non-negative operator given as ``matvec``.

    Convergence is declared when the growth factor stabilizes, either step to
    step or cyclically with a short period; in the cyclic case the geometric
    mean over one period is the eigenvalue.  (Heavily tilted operators can
    underflow into a cyclic sparsity pattern whose growth factor alternates
    forever while its period mean converges.)  Returns (eigenvalue, vector).
    """
    v = np.asarray(v0, dtype=float)
    v = v / v.sum()
    hist: list[float] = []
    for it in range(1, max_iter + 1):
        w = matvec(v)
        s = float(w.sum())
        if not np.isfinite(s) or s <= 0.0:
            raise PowerIterationError("operator iterate degenerated", float("nan"), it)
        # v sums to one, so s is this step's growth factor
        hist.append(s)
        w = w / s
        for period in (1, 2, 3, 4):
            if len(hist) > period and abs(s - hist[-1 - period]) <= tol * max(1.0, abs(s)):
                rho = float(np.exp(np.mean(np.log(hist[-period:]))))
                return rho, w
        v = w
    raise PowerIterationError("power iteration did not converge",
                              abs(hist[-1] - hist[-2]), max_iter)


@lru_cache(maxsize=8)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_nodes(a: float, b: float, n: int = 16):
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def log_exp_integral(c, u, v):
    """log of the integral of exp(c*s) ds over [u, v], elementwise stable.

    Handles c of either sign (broadcastable array or scalar), the c -> 0
    limit, and arbitrarily large c*d without overflow; requires v > u
    elementwise.
    """
    c = np.asarray(c, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = v - u
    # integral = e^{cu} * d * (e^x - 1)/x with x = c*d, and
    # log((e^x - 1)/x) = max(x, 0) + log1p(-exp(-|x|)) - log|x|
    x = c * d
    xa = np.maximum(np.abs(x), 1e-9)  # keeps the discarded where-branch finite
    grow = np.maximum(x, 0.0) + np.log1p(-np.exp(-xa)) - np.log(xa)
    return c * u + np.log(d) + np.where(np.abs(x) <= 1e-8, x / 2.0, grow)


def logsumexp_scalar(values) -> float:
    arr = np.asarray(values, dtype=float)
    m = np.max(arr)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(arr - m).sum()))
