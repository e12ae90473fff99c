"""Closed-form multifractal spectra of the two-phase Moran measure.

The building block is the concave function

    beta(s) = -log(prob**s + (1 - prob)**s) / log_base

for ``(log_base, prob) = (log A, p)`` (``beta_1``) and ``(log B, q)``
(``beta_2``).  Its derivative runs from ``beta'(-inf) = -log(prob)/log_base``
down to ``beta'(+inf) = -log(1-prob)/log_base``.  Everything else here
(Legendre transforms, the revised functions, tangent constructions and the
piecewise dimension formulas) is expressed through it.

Dimensions of empty level sets are reported as :data:`EMPTY` (``-inf``).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.special import expit

from .errors import NoTangency, OutOfRange
from .model import ModelParams, require_valid

EMPTY = -math.inf
"""Dimension assigned to the empty set."""

LOG2 = math.log(2.0)

# range checks accept values this close (relative) to an interval endpoint
_EDGE_TOL = 1e-13


def is_empty(value: float) -> bool:
    return value == EMPTY


@dataclass(frozen=True)
class Asymptote:
    """Affine asymptote ``beta(s) ~ slope * s + intercept`` at ``s -> +-inf``."""

    slope: float
    intercept: float


@dataclass(frozen=True)
class BetaFunction:
    log_base: float
    prob: float

    @classmethod
    def from_base(cls, base: float, prob: float) -> "BetaFunction":
        return cls(math.log(base), prob)

    @property
    def degenerate(self) -> bool:
        return self.prob == 0.5

    # derivative landmarks
    @property
    def d_pos_inf(self) -> float:
        return -math.log1p(-self.prob) / self.log_base

    @property
    def d_neg_inf(self) -> float:
        return -math.log(self.prob) / self.log_base

    @property
    def d_one(self) -> float:
        p = self.prob
        return (-p * math.log(p) - (1 - p) * math.log1p(-p)) / self.log_base

    @property
    def d_zero(self) -> float:
        return 0.5 * (-math.log(self.prob) - math.log1p(-self.prob)) / self.log_base

    @property
    def alpha_range(self) -> tuple[float, float]:
        return min(self.d_pos_inf, self.d_neg_inf), max(self.d_pos_inf, self.d_neg_inf)

    def __call__(self, s):
        return beta(self, s)


def _logit_prob(f: BetaFunction) -> float:
    return math.log(f.prob) - math.log1p(-f.prob)


def beta(f: BetaFunction, s):
    """``beta(s)`` for finite ``s`` (scalar or array); an :class:`Asymptote` at ``+-inf``."""
    if np.isscalar(s) and math.isinf(s):
        if f.degenerate:
            return Asymptote(LOG2 / f.log_base, -LOG2 / f.log_base)
        slope = f.d_pos_inf if (s > 0) == (f.prob < 0.5) else f.d_neg_inf
        return Asymptote(slope, 0.0)
    s_arr = np.asarray(s, dtype=float)
    out = -np.logaddexp(s_arr * math.log(f.prob), s_arr * math.log1p(-f.prob)) / f.log_base
    return float(out) if out.ndim == 0 else out


def gibbs_weight(f: BetaFunction, s):
    """Left weight ``base**beta(s) * prob**s`` (``1/2`` at ``s = 0``, ``prob`` at ``s = 1``).

    At ``s = +inf`` the weight is exactly 0 and at ``s = -inf`` exactly 1
    (for ``prob < 1/2``).
    """
    if np.isscalar(s) and math.isinf(s):
        if f.degenerate:
            return 0.5
        return 0.0 if (s > 0) == (f.prob < 0.5) else 1.0
    out = expit(np.asarray(s, dtype=float) * _logit_prob(f))
    return float(out) if np.ndim(out) == 0 else out


def beta_prime(f: BetaFunction, s):
    """Analytic derivative; the limits are returned at ``s = +-inf``."""
    if np.isscalar(s) and math.isinf(s):
        if f.degenerate:
            return f.d_zero
        return f.d_pos_inf if (s > 0) == (f.prob < 0.5) else f.d_neg_inf
    w = gibbs_weight(f, s)
    out = (-w * math.log(f.prob) - (1 - np.asarray(w)) * math.log1p(-f.prob)) / f.log_base
    return float(out) if np.ndim(out) == 0 else out


def _weight_for_alpha(f: BetaFunction, alpha: float) -> tuple[float, float]:
    """Gibbs weight ``w`` and ``1 - w`` with ``beta'(s) = alpha``, each computed directly."""
    if f.degenerate:
        raise OutOfRange("degenerate: beta-prime constant")
    lo, hi = f.alpha_range
    tol = _EDGE_TOL * max(1.0, abs(alpha))
    if not (lo - tol <= alpha <= hi + tol):
        raise OutOfRange(f"alpha out of range: {alpha!r} not in [{lo!r}, {hi!r}]")
    # snap to the range ends so the endpoint limits come out exact
    if abs(alpha - f.d_pos_inf) <= tol:
        return 0.0, 1.0
    if abs(alpha - f.d_neg_inf) <= tol:
        return 1.0, 0.0
    span = math.log1p(-f.prob) - math.log(f.prob)
    w = (alpha * f.log_base + math.log1p(-f.prob)) / span
    w_c = (-math.log(f.prob) - alpha * f.log_base) / span
    return min(max(w, 0.0), 1.0), min(max(w_c, 0.0), 1.0)


def beta_prime_inverse(f: BetaFunction, alpha: float) -> float:
    """The ``s`` with ``beta'(s) = alpha``; ``+inf`` / ``-inf`` at the range ends.

    Closed form: ``beta'`` is an affine function of the Gibbs weight, which
    is a logistic function of ``s``.
    """
    w, w_c = _weight_for_alpha(f, alpha)
    if w == 0.0:
        return math.inf if f.prob < 0.5 else -math.inf
    if w_c == 0.0:
        return -math.inf if f.prob < 0.5 else math.inf
    return (math.log(w) - math.log(w_c)) / _logit_prob(f)


def legendre(f: BetaFunction, alpha: float) -> float:
    """``beta*(alpha) = inf_s {s alpha - beta(s)}`` in closed form.

    Equals the binary entropy of the Gibbs weight divided by ``log_base``;
    it vanishes at both ends of the range.  Out-of-range ``alpha`` raises
    :class:`OutOfRange`.
    """
    if f.degenerate:
        a = f.d_zero
        if abs(alpha - a) <= _EDGE_TOL * max(1.0, abs(a)):
            return LOG2 / f.log_base
        raise OutOfRange(f"alpha out of range: degenerate beta only admits {a!r}")
    w, w_c = _weight_for_alpha(f, alpha)
    h = 0.0
    if w > 0:
        h -= w * math.log(w)
    if w_c > 0:
        h -= w_c * math.log(w_c)
    return h / f.log_base


def default_s_grid() -> np.ndarray:
    """Dense grid on ``[-60, 60]`` (containing 0 and 1) plus log-spaced tails to ``1e6``."""
    core = np.linspace(-60.0, 60.0, 12001)
    core = np.union1d(np.round(core, 12), [0.0, 1.0])
    tail = np.logspace(math.log10(60.0), 6.0, 241)[1:]
    return np.concatenate((-tail[::-1], core, tail))


@functools.lru_cache(maxsize=None)
def _cached_grid() -> np.ndarray:
    grid = default_s_grid()
    grid.setflags(write=False)
    return grid


def grid_legendre(func: Callable[[np.ndarray], np.ndarray], alphas, s_grid: np.ndarray | None = None,
                  refine: bool = True) -> np.ndarray:
    """Numerical ``inf_s {s alpha - func(s)}`` over a finite grid.

    Independent of the closed forms: a brute grid minimum followed by a
    bounded scalar refinement between the neighbouring grid points.
    """
    s = _cached_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    fs = np.asarray(func(s), dtype=float)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    out = np.empty(alphas.shape)
    for i, a in enumerate(alphas):
        vals = s * a - fs
        k = int(np.argmin(vals))
        best = float(vals[k])
        if refine:
            lo = s[max(k - 1, 0)]
            hi = s[min(k + 1, s.size - 1)]
            if hi > lo:
                res = minimize_scalar(lambda t: t * a - float(func(np.array([t]))[0]),
                                      bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-12})
                best = min(best, float(res.fun))
        out[i] = best
    return out


def legendre_grid(f: BetaFunction, alphas) -> np.ndarray:
    """Grid-infimum Legendre transform of ``beta`` (cross-check oracle)."""
    return grid_legendre(lambda s: beta(f, s), alphas)


def revised_beta(f: BetaFunction, which: str, s):
    """The revised functions ``beta~_1`` (``which="one"``) and ``beta~_2`` (``"two"``).

    ``beta~_1`` replaces ``beta`` on ``(0, 1)`` by the chord between
    ``(0, beta(0))`` and ``(1, 0)``.

    ``beta~_2`` keeps ``beta`` on ``[0, 1]`` and continues affinely outside
    with the asymptotic slopes: ``beta(0) + s beta'(-inf)`` for ``s < 0`` and
    ``(s - 1) beta'(+inf)`` for ``s > 1``.  This is the concave function whose
    conjugate is ``alpha`` on ``[beta'(+inf), beta'(1))``, ``beta*`` on
    ``[beta'(1), beta'(0))`` and ``log 2/log_base`` on ``[beta'(0), beta'(-inf)]``.
    """
    s_arr = np.asarray(s, dtype=float)
    base = np.asarray(beta(f, s_arr))
    b0 = -LOG2 / f.log_base
    if which == "one":
        chord = (1.0 - s_arr) * b0
        out = np.where((s_arr > 0) & (s_arr < 1), chord, base)
    elif which == "two":
        left = b0 + s_arr * f.d_neg_inf
        right = (s_arr - 1.0) * f.d_pos_inf
        out = np.where(s_arr < 0, left, np.where(s_arr > 1, right, base))
    else:
        raise ValueError("which must be 'one' or 'two'")
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# model-level quantities


def betas(params: ModelParams) -> tuple[BetaFunction, BetaFunction]:
    return BetaFunction(params.log_A, params.p), BetaFunction(params.log_B, params.q)


@dataclass(frozen=True)
class Landmarks:
    """Derivative landmarks ``a = beta'(+inf) <= b = beta'(1) <= c = beta'(0) <= d = beta'(-inf)``."""

    a1: float
    b1: float
    c1: float
    d1: float
    a2: float
    b2: float
    c2: float
    d2: float
    log2_log_A: float
    log2_log_B: float


def landmarks(params: ModelParams) -> Landmarks:
    b1f, b2f = betas(params)
    return Landmarks(b1f.d_pos_inf, b1f.d_one, b1f.d_zero, b1f.d_neg_inf,
                     b2f.d_pos_inf, b2f.d_one, b2f.d_zero, b2f.d_neg_inf,
                     LOG2 / params.log_A, LOG2 / params.log_B)


@dataclass(frozen=True)
class SetDimensions:
    """Dimensions of the support and almost-everywhere local dimensions."""

    dim_hausdorff: float
    dim_packing: float
    ae_lower_local_dim: float
    ae_upper_local_dim: float
    local_dim_min: float
    local_dim_max: float


def support_dimensions(params: ModelParams) -> SetDimensions:
    """Support dimensions, a.e. local dimensions and the local-dimension bounds."""
    lm = landmarks(params)
    return SetDimensions(lm.log2_log_A, lm.log2_log_B, lm.b1, lm.b2, lm.a1, lm.d2)


def tau_closed(params: ModelParams, s: float, which: str) -> float:
    """Lower (``min``) or upper (``max``) L^q spectrum of ``mu`` at ``s``."""
    b1f, b2f = betas(params)
    v1, v2 = beta(b1f, s), beta(b2f, s)
    if which == "lower":
        return min(v1, v2)
    if which == "upper":
        return max(v1, v2)
    raise ValueError("which must be 'lower' or 'upper'")


def _in(x: float, lo: float, hi: float) -> bool:
    tol = _EDGE_TOL * max(1.0, abs(x))
    return lo - tol <= x <= hi + tol


def dim_lower_level_set(params: ModelParams, alpha: float, kind: str) -> float:
    """Hausdorff or packing dimension of the lower level set at ``alpha``."""
    require_valid(params)
    b1f, _ = betas(params)
    lm = landmarks(params)
    if not _in(alpha, lm.a1, lm.d1):
        return EMPTY
    if kind == "packing":
        return lm.log2_log_B
    if kind != "hausdorff":
        raise ValueError("kind must be 'hausdorff' or 'packing'")
    if lm.b1 <= alpha < lm.c1:
        return min(alpha, lm.log2_log_A)
    return legendre(b1f, alpha)


def dim_upper_level_set(params: ModelParams, alpha: float, kind: str) -> float:
    """Hausdorff or packing dimension of the upper level set at ``alpha``."""
    require_valid(params)
    _, b2f = betas(params)
    lm = landmarks(params)
    if not _in(alpha, lm.a2, lm.d2):
        return EMPTY
    if kind == "hausdorff":
        return min(lm.log2_log_A, legendre(b2f, alpha))
    if kind != "packing":
        raise ValueError("kind must be 'hausdorff' or 'packing'")
    if alpha < lm.b2:
        return alpha
    if alpha < lm.c2:
        return legendre(b2f, alpha)
    return lm.log2_log_B


# ---------------------------------------------------------------------------
# tangent constructions


@dataclass(frozen=True)
class TangencyResult:
    s: float
    alpha_tangent: float
    value: float
    residual: float
    admissible: bool = True


_XTOL = 1e-13


@functools.lru_cache(maxsize=65536)
def _tangent_g(b1f: BetaFunction, b2f: BetaFunction, alpha_p: float) -> TangencyResult:
    a2, b2 = b2f.d_pos_inf, b2f.d_one
    if not (a2 <= alpha_p < b2):
        raise OutOfRange(f"alpha' out of range for g: {alpha_p!r} not in [{a2!r}, {b2!r})")
    if alpha_p < b1f.d_zero:
        raise NoTangency("no admissible tangency: residual not monotone on [0, 1]")
    target = legendre(b2f, alpha_p)

    def phi(s):
        return s * alpha_p - beta(b1f, s) - target

    lo_val, hi_val = phi(0.0), phi(1.0)
    if lo_val > 0:
        raise NoTangency(
            f"no admissible tangency: beta_2*({alpha_p!r}) = {target!r} below log2/logA")
    # beta_2* <= alpha' below beta_2'(1), so phi(1) < 0 is rounding near that end
    if lo_val == 0:
        s1 = 0.0
    elif hi_val <= 0:
        s1 = 1.0
    else:
        s1 = bisect(phi, 0.0, 1.0, xtol=_XTOL, rtol=4 * np.finfo(float).eps, maxiter=200)
    g = beta_prime(b1f, s1)
    return TangencyResult(s1, g, s1 * alpha_p - beta(b1f, s1), phi(s1), g <= b1f.d_zero)


def tangent_g(params: ModelParams, alpha_p: float) -> TangencyResult:
    """Tangent to ``beta_1*`` through ``(alpha', beta_2*(alpha'))``.

    Solves ``s alpha' - beta_1(s) = beta_2*(alpha')`` for ``s`` in ``[0, 1]``;
    ``alpha_tangent`` is ``g(alpha') = beta_1'(s)``.
    """
    b1f, b2f = betas(params)
    return _tangent_g(b1f, b2f, float(alpha_p))


@functools.lru_cache(maxsize=65536)
def _tangent_h(b1f: BetaFunction, b2f: BetaFunction, alpha: float) -> TangencyResult:
    b1, d1 = b1f.d_one, b1f.d_neg_inf
    if not _in(alpha, b1, d1):
        raise OutOfRange(f"alpha out of range for h: {alpha!r} not in [{b1!r}, {d1!r}]")
    if alpha >= b2f.d_pos_inf:
        raise NoTangency("no admissible tangency: residual not monotone on (1, inf)")
    target = legendre(b1f, alpha)

    def psi(s):
        return s * alpha - beta(b2f, s) - target

    at_one = psi(1.0)
    if at_one <= 0:
        s2 = 1.0
    else:
        hi = 2.0
        while psi(hi) > 0:
            hi *= 2.0
            if hi > 1e12:
                return TangencyResult(math.inf, b2f.d_pos_inf, target, 0.0)
        s2 = bisect(psi, 1.0, hi, xtol=_XTOL, rtol=4 * np.finfo(float).eps, maxiter=400)
    return TangencyResult(s2, beta_prime(b2f, s2), s2 * alpha - beta(b2f, s2), psi(s2))


def tangent_h(params: ModelParams, alpha: float) -> TangencyResult:
    """Tangent to ``beta_2*`` through ``(alpha, beta_1*(alpha))``.

    Solves ``s alpha - beta_2(s) = beta_1*(alpha)`` for ``s >= 1``;
    ``alpha_tangent`` is ``h(alpha) = beta_2'(s)``.  At ``alpha = beta_1'(1)``
    the solution is ``s = 1`` and ``h = beta_2'(1)``.
    """
    b1f, b2f = betas(params)
    return _tangent_h(b1f, b2f, float(alpha))


# ---------------------------------------------------------------------------
# joint spectrum


REGIONS = ("I", "II", "III")
DEGENERATE = "degenerate"


def dim_joint(params: ModelParams, alpha: float, alpha_p: float, kind: str) -> tuple[float, str | None]:
    """Dimension of the set with lower local dimension ``alpha`` and upper ``alpha'``.

    Returns ``(value, region)`` with region one of ``"I"``, ``"II"``,
    ``"III"``; ``(EMPTY, None)`` outside the admissible rectangle.  With
    ``p = 1/2`` or ``q = 1/2`` one of the marginal level sets is a single
    full set and the region is ``"degenerate"``.
    """
    require_valid(params)
    if kind not in ("hausdorff", "packing"):
        raise ValueError("kind must be 'hausdorff' or 'packing'")
    lm = landmarks(params)
    if not (_in(alpha, lm.a1, lm.d1) and _in(alpha_p, lm.a2, lm.d2)):
        return EMPTY, None
    if params.p == 0.5:
        return dim_upper_level_set(params, alpha_p, kind), DEGENERATE
    if params.q == 0.5:
        return dim_lower_level_set(params, alpha, kind), DEGENERATE
    b1f, b2f = betas(params)

    if kind == "hausdorff":
        if not (lm.b1 <= alpha <= lm.c1 and lm.a2 <= alpha_p < lm.b2):
            return min(dim_lower_level_set(params, alpha, "hausdorff"),
                       dim_upper_level_set(params, alpha_p, "hausdorff")), "I"
        try:
            tg = tangent_g(params, alpha_p)
        except NoTangency:
            tg = None
        if tg is not None and tg.alpha_tangent <= lm.c1 and tg.alpha_tangent <= alpha < lm.c1:
            return min(lm.log2_log_A, tg.s * alpha - beta(b1f, tg.s)), "II"
        return min(legendre(b1f, alpha), legendre(b2f, alpha_p)), "III"

    if not (lm.b1 <= alpha <= lm.d1 and lm.a2 <= alpha_p < lm.b2):
        return dim_upper_level_set(params, alpha_p, "packing"), "I"
    th = tangent_h(params, alpha)
    if alpha_p < th.alpha_tangent:
        if math.isinf(th.s):  # pragma: no cover - h at the range end leaves II empty
            return legendre(b2f, alpha_p), "III"
        return th.s * alpha_p - beta(b2f, th.s), "II"
    return legendre(b2f, alpha_p), "III"


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class SpectrumCurve:
    """Samples ``(alpha, dim_hausdorff, dim_packing, region)`` with increasing ``alpha``."""

    alpha: np.ndarray
    dim_hausdorff: np.ndarray
    dim_packing: np.ndarray
    region: tuple[str, ...]

    def rows(self):
        for a, h, p, r in zip(self.alpha, self.dim_hausdorff, self.dim_packing, self.region):
            yield float(a), float(h), float(p), r


def _piece_tag(alpha: float, mid1: float, mid2: float) -> str:
    if alpha < mid1:
        return "left"
    if alpha < mid2:
        return "middle"
    return "right"


def level_set_curve(params: ModelParams, which: str, n: int) -> SpectrumCurve:
    """Marginal spectra on an ``n``-point grid spanning the admissible range.

    ``which="lower"`` samples the lower level sets, ``"upper"`` the upper
    ones; the region column names the piece of the piecewise formula.
    """
    lm = landmarks(params)
    if which == "lower":
        lo, hi, m1, m2, fn = lm.a1, lm.d1, lm.b1, lm.c1, dim_lower_level_set
    elif which == "upper":
        lo, hi, m1, m2, fn = lm.a2, lm.d2, lm.b2, lm.c2, dim_upper_level_set
    else:
        raise ValueError("which must be 'lower' or 'upper'")
    alphas = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    dh = np.array([fn(params, a, "hausdorff") for a in alphas])
    dp = np.array([fn(params, a, "packing") for a in alphas])
    tags = tuple(_piece_tag(a, m1, m2) for a in alphas)
    return SpectrumCurve(alphas, dh, dp, tags)


def joint_grid(params: ModelParams, n_alpha: int, n_alpha_p: int, kind: str):
    """``dim_joint`` over a rectangle grid; returns ``(alphas, alpha_ps, values, tags)``."""
    lm = landmarks(params)
    alphas = np.linspace(lm.a1, lm.d1, n_alpha)
    alpha_ps = np.linspace(lm.a2, lm.d2, n_alpha_p)
    values = np.empty((n_alpha, n_alpha_p))
    tags = np.empty((n_alpha, n_alpha_p), dtype=object)
    for i, a in enumerate(alphas):
        for j, ap in enumerate(alpha_ps):
            values[i, j], tags[i, j] = dim_joint(params, float(a), float(ap), kind)
    return alphas, alpha_ps, values, tags
