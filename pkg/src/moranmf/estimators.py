"""Finite-scale estimators: local-dimension trajectories, partition sums, deviation counts.

All estimators work with cylinders instead of balls.  For the two-phase
measure a level-n cylinder's mass only depends on how many zeros it has in
the A-levels and in the B-levels, so sums over the ``2**n`` cylinders reduce
to sums over ``(j1, j2)`` and, for deep levels, to closed forms in the level
counts ``(k1, k2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logsumexp

from . import _kernels
from .model import GeneralParams, ModelParams, as_digits
from .spectra import beta, betas

LOG2 = math.log(2.0)

# exact integer cylinder counts below this depth
EXACT_COUNT_MAX_N = 64
# (k1+1)*(k2+1) cells handled by the window kernel
KERNEL_MAX_CELLS = 40_000_000
# brute-force enumeration limit
ENUMERATION_MAX_N = 22


def log_scale(params: ModelParams, n: int) -> float:
    """``log |I_n|`` (negative), identical for every level-n cylinder."""
    return params.log_length(n)


def level_log_masses(params: ModelParams | GeneralParams, n: int) -> np.ndarray:
    """Log-masses of all level-n cylinders by enumeration (lexicographic order)."""
    if n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration bounded to n <= {ENUMERATION_MAX_N}")
    if n == 0:
        return np.zeros(1)
    _, probs = params.level_arrays(n)
    return _kernels.enumerate_log_masses(np.log(probs), np.log1p(-probs))


# ---------------------------------------------------------------------------
# local dimension trajectories


@dataclass(frozen=True)
class Trajectory:
    levels: np.ndarray
    values: np.ndarray
    checkpoints: tuple[int, ...] = ()

    def at(self, level: int) -> float:
        idx = int(np.searchsorted(self.levels, level))
        if idx >= self.levels.size or self.levels[idx] != level:
            raise KeyError(level)
        return float(self.values[idx])


def local_dim_trajectory(params: ModelParams | GeneralParams, address, n_max: int,
                         checkpoint_levels: Iterable[int] = ()) -> Trajectory:
    """``d(nu, x, n) = log nu(I_n(x)) / log |I_n(x)|`` for ``n = 1..n_max``.

    ``address`` is a digit word or any iterable yielding at least ``n_max``
    digits.  ``checkpoints`` holds the indices of the requested levels.
    """
    if isinstance(address, (str, np.ndarray, list, tuple)):
        digits = as_digits(address)[:n_max]
    else:
        digits = np.fromiter((int(d) for _, d in zip(range(n_max), address)), dtype=np.uint8)
        digits = as_digits(digits)
    if digits.size < n_max:
        raise ValueError(f"address supplies {digits.size} digits, need {n_max}")
    logd, probs = params.level_arrays(n_max)
    log_w = np.where(digits == 0, np.log(probs), np.log1p(-probs))
    values = _kernels.running_ratio(-log_w, logd)
    levels = np.arange(1, n_max + 1)
    cps = tuple(int(c) - 1 for c in checkpoint_levels if 1 <= int(c) <= n_max)
    return Trajectory(levels, values, cps)


def two_phase_local_dim(params: ModelParams, n: int, j1: int, j2: int) -> float:
    """``d(mu, x, n)`` for a point with ``j1`` (``j2``) zeros among the first ``n``
    levels of A (B) phase; valid at any depth."""
    k1, k2 = params.schedule.level_counts(n)
    if not (0 <= j1 <= k1 and 0 <= j2 <= k2):
        raise ValueError("zero counts exceed the phase level counts")
    lm = -(j1 * math.log(params.p) + (k1 - j1) * math.log1p(-params.p)
           + j2 * math.log(params.q) + (k2 - j2) * math.log1p(-params.q))
    return lm / (k1 * params.log_A + k2 * params.log_B)


# ---------------------------------------------------------------------------
# partition sums and L^q estimates


def partition_sum(params: ModelParams, n: int, s: float) -> float:
    """``log sum_w mu(I_w)**s`` over level-n cylinders, in closed form."""
    if n == 0:
        return 0.0
    if s == 1:
        return 0.0
    if s == 0:
        return n * LOG2
    k1, k2 = params.schedule.level_counts(n)
    b1f, b2f = betas(params)
    return -(k1 * params.log_A * beta(b1f, s) + k2 * params.log_B * beta(b2f, s))


def partition_sum_bruteforce(params: ModelParams | GeneralParams, n: int, s: float) -> float:
    """Enumeration oracle for :func:`partition_sum` (``n <= 22``)."""
    return float(logsumexp(s * level_log_masses(params, n)))


def tau_estimate(params: ModelParams, n: int, s: float) -> float:
    """``log sum mu(I_w)**s / log r`` at level ``n`` with ``r = |I_n|``."""
    if s == 1:
        return 0.0
    return partition_sum(params, n, s) / log_scale(params, n)


def sampled_levels(params: ModelParams, depth: int, midpoints: int = 8) -> list[int]:
    """Breakpoints ``N_1..N_depth`` plus geometric midpoints inside every phase."""
    levels = set()
    prev = 0
    for i in range(1, depth + 1):
        hi = params.schedule.N(i)
        levels.add(hi)
        lo = max(prev, 1)
        if hi - prev > 1:
            llo, lhi = math.log(lo), math.log(hi)
            for k in range(1, midpoints + 1):
                m = int(round(math.exp(llo + (lhi - llo) * k / (midpoints + 1))))
                if prev < m <= hi:
                    levels.add(m)
        prev = hi
    return sorted(levels)


@dataclass(frozen=True)
class LimitEstimate:
    lower: float
    upper: float
    level_lower: int
    level_upper: int


def _min_max(levels: Sequence[int], values: Sequence[float]) -> LimitEstimate:
    i_lo = int(np.argmin(values))
    i_hi = int(np.argmax(values))
    return LimitEstimate(float(values[i_lo]), float(values[i_hi]), levels[i_lo], levels[i_hi])


def tau_liminf_limsup(params: ModelParams, s: float, breakpoint_depth: int) -> LimitEstimate:
    """(min, max) of :func:`tau_estimate` over the sampled levels.

    A finite-truncation stand-in for the lower and upper L^q spectra.
    """
    levels = sampled_levels(params, breakpoint_depth)
    values = [tau_estimate(params, n, s) for n in levels]
    return _min_max(levels, values)


# ---------------------------------------------------------------------------
# large deviation counts


@dataclass(frozen=True)
class DeviationCount:
    n: int
    alpha: float
    beta: float
    eps: float
    count: int | None
    log_count: float
    log_scale: float
    method: str
    boundary: bool = False

    @property
    def exponent(self) -> float:
        """``log(count) / (-log r)``; ``-inf`` for an empty window."""
        return self.log_count / -self.log_scale


def _phase_logs(params: ModelParams) -> tuple[float, float, float, float]:
    return (math.log(params.p), math.log1p(-params.p), math.log(params.q), math.log1p(-params.q))


def _exact_window_count(k1, k2, a0, a1, b0, b1, lo, hi) -> int:
    total = 0
    c1 = [math.comb(k1, j) for j in range(k1 + 1)]
    c2 = [math.comb(k2, j) for j in range(k2 + 1)]
    for j1 in range(k1 + 1):
        m1 = j1 * a0 + (k1 - j1) * a1
        for j2 in range(k2 + 1):
            m = m1 + (j2 * b0 + (k2 - j2) * b1)
            if lo <= m <= hi:
                total += c1[j1] * c2[j2]
    return total


def _binary_entropy(x: float) -> float:
    h = 0.0
    if 0 < x < 1:
        h = -x * math.log(x) - (1 - x) * math.log1p(-x)
    return h


def _rate_window_count(k1, k2, a0, a1, b0, b1, lo, hi) -> float:
    """Leading-order ``log count`` for very deep levels.

    Maximises ``k1 h(x) + k2 h(y)`` over zero fractions ``(x, y)`` whose
    log-mass lies in ``[lo, hi]``; the constrained optimum has Gibbs form
    ``x = expit(-lam (a0 - a1))``, ``y = expit(-lam (b0 - b1))``.
    """
    da, db = a0 - a1, b0 - b1

    def mass(x, y):
        return k1 * (a1 + x * da) + k2 * (b1 + y * db)

    def entropy(x, y):
        return k1 * _binary_entropy(x) + k2 * _binary_entropy(y)

    m_free = mass(0.5, 0.5)
    if lo <= m_free <= hi:
        return (k1 + k2) * LOG2
    corners = [mass(x, y) for x in (0.0, 1.0) for y in (0.0, 1.0)]
    m_min, m_max = min(corners), max(corners)
    if hi < m_min or lo > m_max:
        return -math.inf
    target = hi if m_free > hi else lo
    if target <= m_min or target >= m_max:
        return 0.0

    def resid(lam):
        return mass(expit(-lam * da), expit(-lam * db)) - target

    lam_hi = 1.0
    while resid(lam_hi) * resid(-lam_hi) > 0:
        lam_hi *= 2.0
        if lam_hi > 1e6:
            return 0.0
    lam = brentq(resid, -lam_hi, lam_hi, xtol=1e-14)
    return entropy(expit(-lam * da), expit(-lam * db))


def count_in_log_window(params: ModelParams, n: int, lo: float, hi: float) -> tuple[int | None, float, str]:
    """Number of level-n cylinders with log-mass in ``[lo, hi]``.

    Returns ``(count or None, log_count, method)``: exact integers for
    ``n <= 64``, a log-binomial window sum for moderate level counts and a
    rate approximation beyond that.
    """
    k1, k2 = params.schedule.level_counts(n)
    a0, a1, b0, b1 = _phase_logs(params)
    if hi < lo:
        return 0, -math.inf, "exact"
    if n <= EXACT_COUNT_MAX_N:
        c = _exact_window_count(k1, k2, a0, a1, b0, b1, lo, hi)
        return c, (math.log(c) if c else -math.inf), "exact"
    if (k1 + 1) * (k2 + 1) <= KERNEL_MAX_CELLS:
        return None, _kernels.window_log_count(k1, k2, a0, a1, b0, b1, lo, hi), "log-binomial"
    return None, _rate_window_count(k1, k2, a0, a1, b0, b1, lo, hi), "rate"


def large_deviation_count(params: ModelParams, n: int, alpha: float, beta_: float,
                          eps: float) -> DeviationCount:
    """Level-n cylinders with ``r**(beta+eps) <= mu(I_w) <= r**(alpha-eps)``, ``r = |I_n|``."""
    if alpha > beta_:
        raise ValueError("need alpha <= beta")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    lr = log_scale(params, n)
    lo = (beta_ + eps) * lr
    hi = (alpha - eps) * lr
    count, log_count, method = count_in_log_window(params, n, lo, hi)
    return DeviationCount(n, alpha, beta_, eps, count, log_count, lr, method, boundary=eps == 0)


def large_deviation_count_bruteforce(params: ModelParams | GeneralParams, n: int, lo: float,
                                     hi: float) -> int:
    """Enumeration oracle: cylinders with log-mass in ``[lo, hi]`` (``n <= 22``)."""
    masses = level_log_masses(params, n)
    return int(np.count_nonzero((masses >= lo) & (masses <= hi)))


@dataclass(frozen=True)
class DeviationSpectrumEstimate:
    eps: float
    lower: float
    upper: float
    level_lower: int
    level_upper: int
    counts: tuple[DeviationCount, ...] = field(repr=False, default=())


def ld_spectrum_estimate(params: ModelParams, alpha: float, beta_: float, eps: float,
                         breakpoint_depth: int) -> DeviationSpectrumEstimate:
    """(min, max) over sampled levels of ``log count / -log r``."""
    levels = sampled_levels(params, breakpoint_depth)
    counts = tuple(large_deviation_count(params, n, alpha, beta_, eps) for n in levels)
    est = _min_max(levels, [c.exponent for c in counts])
    return DeviationSpectrumEstimate(eps, est.lower, est.upper, est.level_lower, est.level_upper,
                                     counts)


DEFAULT_EPS = (0.1, 0.03, 0.01)


def ld_spectrum_table(params: ModelParams, alpha: float, beta_: float, breakpoint_depth: int,
                      eps_seq: Sequence[float] = DEFAULT_EPS) -> list[DeviationSpectrumEstimate]:
    """:func:`ld_spectrum_estimate` for a decreasing sequence of ``eps``."""
    return [ld_spectrum_estimate(params, alpha, beta_, e, breakpoint_depth) for e in eps_seq]
