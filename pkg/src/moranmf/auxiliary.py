"""Auxiliary measures ``mu'`` with level-dependent left weights ``p'_n``.

An :class:`AuxSpec` is a table of constant-weight segments.  Every segment
lies inside a single phase of the base schedule, so the two quantities that
drive the local dimensions,

    x_k = H(p'_k, p_k)      (mass of mu seen by mu'-typical points)
    y_k = H(p'_k, p'_k)     (mass of mu' itself)

are constant on a segment and running sums over ``1..n`` cost
``O(#segments)`` for any ``n``.

The constructions target prescribed lower/upper local dimensions of ``mu``.
Where a segment length has to be tuned so that the running ratio
``sum x_k / sum log A_k`` touches the target from one side (the "balanced"
segments), lengths are computed in exact rational arithmetic from the
floating-point constants so the floor is exact.
"""

from __future__ import annotations

import bisect as _bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from . import _kernels
from .errors import OutOfRange
from .model import PHASE_A, ModelParams, mixed_entropy, require_valid
from .spectra import (BetaFunction, beta_prime_inverse, betas, dim_joint, gibbs_weight as _gibbs,
                      landmarks, tangent_g, tangent_h)

EXPLICIT_DEPTH_MAX = 1_000_000
# numpy draws binomial counts as int64
BINOMIAL_DEPTH_MAX = 2 ** 62


def gibbs_weight(f: BetaFunction, s: float) -> float:
    """``base**beta(s) * prob**s``; exactly 0 at ``s = +inf`` and 1 at ``s = -inf``."""
    return _gibbs(f, s)


@dataclass(frozen=True)
class Segment:
    end: int
    weight: float
    phase: str
    label: str


@dataclass(frozen=True)
class AuxSpec:
    """Piecewise-constant rule ``n -> p'_n`` on levels ``1..depth``."""

    segments: tuple[Segment, ...]
    provenance_tag: str
    constants: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        prev = 0
        for seg in self.segments:
            if seg.end <= prev:
                raise ValueError("segment ends must be strictly increasing")
            if not 0.0 <= seg.weight <= 1.0:
                raise ValueError("weights must lie in [0, 1]")
            prev = seg.end
        object.__setattr__(self, "_ends", [s.end for s in self.segments])

    @property
    def depth(self) -> int:
        return self.segments[-1].end

    @property
    def degenerate(self) -> bool:
        """True if some weight is exactly 0 or 1 (a single-branch segment)."""
        return any(s.weight in (0.0, 1.0) for s in self.segments)

    def starts(self) -> list[int]:
        return [1] + [s.end + 1 for s in self.segments[:-1]]

    def segment_index(self, n: int) -> int:
        if not 1 <= n <= self.depth:
            raise ValueError(f"level {n} outside the auxiliary table (1..{self.depth})")
        return _bisect.bisect_left(self._ends, n)

    def weight(self, n: int) -> float:
        return self.segments[self.segment_index(n)].weight

    def weights(self, n_max: int) -> np.ndarray:
        out = np.empty(n_max)
        lo = 0
        for seg in self.segments:
            hi = min(seg.end, n_max)
            out[lo:hi] = seg.weight
            lo = hi
            if lo >= n_max:
                break
        if lo < n_max:
            raise ValueError(f"level {n_max} outside the auxiliary table (1..{self.depth})")
        return out

    def label_counts(self, n: int) -> dict[str, int]:
        """Number of levels ``<= n`` carrying each segment label."""
        out: dict[str, int] = {}
        lo = 0
        for seg in self.segments:
            if lo >= n:
                break
            hi = min(seg.end, n)
            out[seg.label] = out.get(seg.label, 0) + hi - lo
            lo = seg.end
        return out

    def pieces(self, n_max: int, cuts: Sequence[int] = ()) -> list[tuple[int, int, Segment]]:
        """``(first, last, segment)`` runs covering ``1..n_max``, split at ``cuts``."""
        bounds = sorted({c for c in cuts if 0 < c < n_max} | {s.end for s in self.segments if s.end < n_max}
                        | {n_max})
        out = []
        lo = 0
        for hi in bounds:
            out.append((lo + 1, hi, self.segments[self.segment_index(hi)]))
            lo = hi
        return out


# ---------------------------------------------------------------------------
# per-segment rates


def _base_prob(params: ModelParams, phase: str) -> float:
    return params.p if phase == PHASE_A else params.q


def _log_div(params: ModelParams, phase: str) -> float:
    return params.log_A if phase == PHASE_A else params.log_B


def segment_terms(params: ModelParams, seg: Segment) -> tuple[float, float, float]:
    """``(x, y, b)`` for one level of the segment."""
    p = _base_prob(params, seg.phase)
    return (mixed_entropy(seg.weight, p), mixed_entropy(seg.weight, seg.weight)
            if 0.0 < seg.weight < 1.0 else 0.0, _log_div(params, seg.phase))


def _rate(params: ModelParams, weight: float, phase: str) -> float:
    return mixed_entropy(weight, _base_prob(params, phase)) / _log_div(params, phase)


# ---------------------------------------------------------------------------
# construction helpers


class _Table:
    """Accumulates segments phase by phase and tracks the exact excess budget."""

    def __init__(self, params: ModelParams, depth: int):
        self.params = params
        self.depth = depth
        self.segments: list[Segment] = []
        self.sched = params.schedule

    def phases(self):
        for i in range(1, self.depth + 1):
            lo, hi = self.sched.N(i - 1), self.sched.N(i)
            yield i, lo, hi, (PHASE_A if i % 2 else "B")

    def add(self, end: int, weight: float, phase: str, label: str) -> None:
        last = self.segments[-1].end if self.segments else 0
        if end <= last:
            return
        if self.segments and self.segments[-1].weight == weight and self.segments[-1].phase == phase \
                and self.segments[-1].label == label:
            self.segments[-1] = Segment(end, weight, phase, label)
        else:
            self.segments.append(Segment(end, weight, phase, label))

    def excess(self, target: Fraction, rates: dict[str, Fraction], labels: set[str]) -> Fraction:
        """``sum len * (rate - target) * log_div`` over segments whose label is in ``labels``."""
        total = Fraction(0)
        lo = 0
        for seg in self.segments:
            if seg.label in labels:
                b = Fraction(_log_div(self.params, seg.phase))
                total += (seg.end - lo) * (rates[seg.label] - target) * b
            lo = seg.end
        return total


def _balanced_length(budget: Fraction, target: Fraction, rate: Fraction, log_div: float,
                     room: int) -> int:
    """Largest ``L <= room`` keeping ``budget + L (rate - target) log_div`` on the budget's side of 0."""
    step = (target - rate) * Fraction(log_div)
    if step == 0:
        return room
    ratio = budget / step
    if ratio <= 0:
        return 0
    return min(room, math.floor(ratio))


def geometric_cut(lo: int, hi: int) -> int:
    """``floor(sqrt(lo * hi))`` clipped into ``(lo, hi]``; splits a phase so both parts dominate in turn."""
    g = math.isqrt(max(lo, 1) * hi)
    return min(max(g, lo + 1), hi)


def _check_range(name: str, value: float, lo: float, hi: float, lo_open=False, hi_open=False) -> None:
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    if not (ok_lo and ok_hi):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise OutOfRange(f"{name} = {value!r} outside {lb}{lo!r}, {hi!r}{rb}")


# ---------------------------------------------------------------------------
# constructions


AUX_TARGETS = ("uniform", "mu", "lower_H", "lower_H_linear", "upper_H", "upper_P_linear",
               "upper_P_curved", "joint_H", "joint_P")


def build_aux(params: ModelParams, target: str, alpha: float | None = None,
              alpha_p: float | None = None, case: str | None = None,
              depth: int | None = None) -> AuxSpec:
    """Segment table of an auxiliary measure.

    ``target`` is one of :data:`AUX_TARGETS`.  ``alpha`` is the prescribed
    lower (``lower_*``, ``joint_*``) or upper (``upper_H``, ``upper_P_curved``)
    local dimension, ``alpha_p`` the upper one for ``upper_P_linear`` and
    the joint cases.  ``depth`` is the number of schedule phases covered
    (default: the schedule truncation).
    """
    require_valid(params)
    depth = params.schedule.depth if depth is None else depth
    builders = {
        "uniform": lambda: _uniform(params, depth),
        "mu": lambda: _mu(params, depth),
        "lower_H": lambda: _lower_h(params, depth, _need(alpha, "alpha")),
        "lower_H_linear": lambda: _lower_h_linear(params, depth, _need(alpha, "alpha")),
        "upper_H": lambda: _upper_h(params, depth, _need(alpha, "alpha")),
        "upper_P_linear": lambda: _upper_p_linear(params, depth, _need(_first(alpha_p, alpha), "alpha_p")),
        "upper_P_curved": lambda: _upper_p_curved(params, depth, _need(_first(alpha, alpha_p), "alpha")),
        "joint_H": lambda: _joint_h(params, depth, _need(alpha, "alpha"), _need(alpha_p, "alpha_p"), case),
        "joint_P": lambda: _joint_p(params, depth, _need(alpha, "alpha"), _need(alpha_p, "alpha_p"), case),
    }
    if target not in builders:
        raise ValueError(f"unknown auxiliary target {target!r}; expected one of {AUX_TARGETS}")
    return builders[target]()


def _need(value, name):
    if value is None:
        raise ValueError(f"{name} is required for this auxiliary target")
    return float(value)


def _first(*vals):
    for v in vals:
        if v is not None:
            return v
    return None


def _uniform(params, depth):
    t = _Table(params, depth)
    for _, _, hi, ph in t.phases():
        t.add(hi, 0.5, ph, "half")
    return AuxSpec(tuple(t.segments), "uniform weights 1/2")


def _mu(params, depth):
    t = _Table(params, depth)
    for _, _, hi, ph in t.phases():
        t.add(hi, _base_prob(params, ph), ph, "p" if ph == PHASE_A else "q")
    return AuxSpec(tuple(t.segments), "mu itself")


def _lower_h(params, depth, alpha):
    f1, _ = betas(params)
    lm = landmarks(params)
    _check_range("alpha", alpha, lm.a1, lm.d1)
    s = beta_prime_inverse(f1, alpha)
    w = gibbs_weight(f1, s)
    t = _Table(params, depth)
    for _, _, hi, ph in t.phases():
        if ph == PHASE_A:
            t.add(hi, w, ph, "gibbs1")
        else:
            t.add(hi, 0.5, ph, "half")
    return AuxSpec(tuple(t.segments), "lower level set, Hausdorff: Gibbs weights in A-phases, 1/2 in B-phases",
                   {"alpha": alpha, "s": s})


def _lower_h_linear(params, depth, alpha):
    """``p`` on ``(N_2i, N'_2i]``, ``1/2`` on ``(N'_2i, N_2i+1]``, ``q`` on B-phases.

    ``N'_2i - N_2i`` is the largest count keeping the p-levels' deficit
    ``(alpha - alpha1) log A`` covered by the q-levels' surplus
    ``(alpha2 - alpha) log B`` accumulated so far.
    """
    lm = landmarks(params)
    _check_range("alpha", alpha, lm.b1, lm.c1, lo_open=True, hi_open=True)
    a1 = _rate(params, params.p, PHASE_A)
    a2 = _rate(params, params.q, "B")
    fa, fa1, fa2 = Fraction(alpha), Fraction(a1), Fraction(a2)
    rates = {"p": fa1, "q": fa2}
    t = _Table(params, depth)
    n_prime = {}
    for i, lo, hi, ph in t.phases():
        if ph == PHASE_A:
            budget = t.excess(fa, rates, {"p", "q"})
            length = _balanced_length(budget, fa, fa1, params.log_A, hi - lo)
            n_prime[i - 1] = lo + length
            t.add(lo + length, params.p, ph, "p")
            t.add(hi, 0.5, ph, "half")
        else:
            t.add(hi, params.q, ph, "q")
    return AuxSpec(tuple(t.segments),
                   "lower level set, linear part: p / 1/2 / q with balanced N'_2i "
                   "(cut measured from N_2i)",
                   {"alpha": alpha, "alpha1": a1, "alpha2": a2, "n_prime": n_prime})


def lower_h_linear_cut(params: ModelParams, alpha: float, i: int, prior: int) -> int:
    """Direct evaluation of the ``N'_2i`` formula (``prior`` = earlier p-level count).

    ``N'_2i = min(N_2i+1, N_2i + floor((alpha2 - alpha) L3 log B / ((alpha - alpha1) log A)) - prior)``
    with ``L3 = sum_{k<i} (N_2k+2 - N_2k+1)``.
    """
    sched = params.schedule
    a1 = Fraction(_rate(params, params.p, PHASE_A))
    a2 = Fraction(_rate(params, params.q, "B"))
    fa = Fraction(alpha)
    l3 = sum(sched.N(2 * k + 2) - sched.N(2 * k + 1) for k in range(i))
    val = (a2 - fa) * l3 * Fraction(params.log_B) / ((fa - a1) * Fraction(params.log_A))
    return min(sched.N(2 * i + 1), sched.N(2 * i) + max(math.floor(val) - prior, 0))


def _upper_h(params, depth, alpha):
    _, f2 = betas(params)
    lm = landmarks(params)
    _check_range("alpha", alpha, lm.a2, lm.d2)
    s = beta_prime_inverse(f2, alpha)
    w = gibbs_weight(f2, s)
    t = _Table(params, depth)
    for _, _, hi, ph in t.phases():
        if ph == PHASE_A:
            t.add(hi, 0.5, ph, "half")
        else:
            t.add(hi, w, ph, "gibbs2")
    return AuxSpec(tuple(t.segments), "upper level set, Hausdorff: 1/2 in A-phases, Gibbs weights in B-phases",
                   {"alpha": alpha, "s": s})


def _upper_p_linear(params, depth, alpha_p):
    """``p`` on A-phases; ``q`` on ``(N_2i+1, N'_2i+1]`` then Gibbs(``s > 1``).

    The q-levels' surplus ``(alpha2 - alpha') log B`` is kept below the
    p-levels' deficit ``(alpha' - alpha1) log A``, so the running ratio
    never exceeds ``alpha'`` and approaches it at the end of each B-phase.
    """
    _, f2 = betas(params)
    lm = landmarks(params)
    _check_range("alpha_p", alpha_p, lm.a2, lm.b2, hi_open=True)
    s = beta_prime_inverse(f2, alpha_p)
    w = gibbs_weight(f2, s)
    a1 = _rate(params, params.p, PHASE_A)
    a2 = _rate(params, params.q, "B")
    fa = Fraction(alpha_p)
    rates = {"p": Fraction(a1), "q": Fraction(a2)}
    t = _Table(params, depth)
    n_prime = {}
    for i, lo, hi, ph in t.phases():
        if ph == PHASE_A:
            t.add(hi, params.p, ph, "p")
        else:
            budget = t.excess(fa, rates, {"p", "q"})
            length = _balanced_length(budget, fa, Fraction(a2), params.log_B, hi - lo)
            n_prime[i - 1] = lo + length
            t.add(lo + length, params.q, ph, "q")
            t.add(hi, w, ph, "gibbs2")
    return AuxSpec(tuple(t.segments),
                   "upper level set, packing, linear part: p / q / Gibbs(s>1); N'_2i+1 ratio "
                   "(alpha-alpha1)logA/((alpha2-alpha)logB)",
                   {"alpha_p": alpha_p, "s": s, "alpha1": a1, "alpha2": a2, "n_prime": n_prime})


def _curved_params(f2: BetaFunction, c2: float, alpha: float):
    """``(s, s0)`` with ``beta_2'(s) = alpha`` and ``s0`` the maximiser of ``beta_2*`` below ``alpha``."""
    s = beta_prime_inverse(f2, alpha)
    alpha0 = min(alpha, c2)
    s0 = beta_prime_inverse(f2, alpha0) if alpha0 < c2 else 0.0
    return s, s0, alpha0


def _upper_p_curved(params, depth, alpha):
    """1/2 on A-phases; Gibbs(``s0``) then Gibbs(``s``) inside every B-phase, cut at the geometric mean."""
    _, f2 = betas(params)
    lm = landmarks(params)
    _check_range("alpha", alpha, lm.b2, lm.d2, lo_open=True)
    s, s0, alpha0 = _curved_params(f2, lm.c2, alpha)
    w, w0 = gibbs_weight(f2, s), gibbs_weight(f2, s0)
    t = _Table(params, depth)
    for _, lo, hi, ph in t.phases():
        if ph == PHASE_A:
            t.add(hi, 0.5, ph, "half")
        else:
            t.add(geometric_cut(lo, hi), w0, ph, "gibbs2_s0")
            t.add(hi, w, ph, "gibbs2")
    return AuxSpec(tuple(t.segments),
                   "upper level set, packing, curved part: phase-matched (B-type weights on B-phases), "
                   "cut at the geometric mean",
                   {"alpha": alpha, "s": s, "s0": s0, "alpha0": alpha0})


def _joint_case(params, alpha, alpha_p, kind):
    lm = landmarks(params)
    value, region = dim_joint(params, alpha, alpha_p, kind)
    if region is None:
        raise OutOfRange(f"(alpha, alpha') = ({alpha!r}, {alpha_p!r}) outside the admissible rectangle")
    if kind == "hausdorff":
        if region == "II":
            return "tangent"
        if region == "I" and lm.b1 <= alpha <= lm.c1:
            return "linear"
        return "outer"
    if region == "II":
        return "II"
    if region == "III":
        return "III"
    return "I-a" if alpha_p >= lm.b2 else "I-b"


def _joint_h(params, depth, alpha, alpha_p, case):
    f1, f2 = betas(params)
    lm = landmarks(params)
    case = case or _joint_case(params, alpha, alpha_p, "hausdorff")
    s_p = beta_prime_inverse(f2, alpha_p)
    w2 = gibbs_weight(f2, s_p)
    t = _Table(params, depth)
    fa = Fraction(alpha)
    if case == "outer":
        s = beta_prime_inverse(f1, alpha)
        w1 = gibbs_weight(f1, s)
        for _, _, hi, ph in t.phases():
            t.add(hi, w1 if ph == PHASE_A else w2, ph, "gibbs1" if ph == PHASE_A else "gibbs2")
        return AuxSpec(tuple(t.segments), "joint Hausdorff, product of Gibbs weights",
                       {"alpha": alpha, "alpha_p": alpha_p, "case": case})
    if case == "linear":
        _check_range("alpha", alpha, lm.b1, lm.c1)
        rates = {"p": Fraction(_rate(params, params.p, PHASE_A)),
                 "gibbs2": Fraction(_rate(params, w2, "B")),
                 "q": Fraction(_rate(params, params.q, "B"))}
        for _, lo, hi, ph in t.phases():
            if ph == PHASE_A:
                budget = t.excess(fa, rates, {"p", "gibbs2", "q"})
                length = _balanced_length(budget, fa, rates["p"], params.log_A, hi - lo)
                t.add(lo + length, params.p, ph, "p")
                t.add(hi, 0.5, ph, "half")
            else:
                t.add(geometric_cut(lo, hi), w2, ph, "gibbs2")
                t.add(hi, params.q, ph, "q")
        return AuxSpec(tuple(t.segments),
                       "joint Hausdorff, linear part: p / 1/2 / Gibbs / q (phase-matched)",
                       {"alpha": alpha, "alpha_p": alpha_p, "case": case})
    if case == "tangent":
        tg = tangent_g(params, alpha_p)
        wg = gibbs_weight(f1, tg.s)
        rates = {"gibbs1_g": Fraction(_rate(params, wg, PHASE_A)),
                 "gibbs2": Fraction(_rate(params, w2, "B"))}
        for _, lo, hi, ph in t.phases():
            if ph == PHASE_A:
                budget = t.excess(fa, rates, {"gibbs1_g", "gibbs2"})
                length = _balanced_length(budget, fa, rates["gibbs1_g"], params.log_A, hi - lo)
                t.add(lo + length, wg, ph, "gibbs1_g")
                t.add(hi, 0.5, ph, "half")
            else:
                t.add(hi, w2, ph, "gibbs2")
        return AuxSpec(tuple(t.segments), "joint Hausdorff, tangent part: Gibbs(s1) / 1/2 / Gibbs(s2)",
                       {"alpha": alpha, "alpha_p": alpha_p, "case": case, "s1": tg.s,
                        "g": tg.alpha_tangent})
    raise ValueError(f"unknown joint Hausdorff case {case!r}")


def _joint_p(params, depth, alpha, alpha_p, case):
    f1, f2 = betas(params)
    lm = landmarks(params)
    case = case or _joint_case(params, alpha, alpha_p, "packing")
    s1 = beta_prime_inverse(f1, alpha)
    w1 = gibbs_weight(f1, s1)
    s_p = beta_prime_inverse(f2, alpha_p)
    w2 = gibbs_weight(f2, s_p)
    t = _Table(params, depth)
    consts = {"alpha": alpha, "alpha_p": alpha_p, "case": case}
    if case == "III":
        for _, _, hi, ph in t.phases():
            t.add(hi, w1 if ph == PHASE_A else w2, ph, "gibbs1" if ph == PHASE_A else "gibbs2")
        return AuxSpec(tuple(t.segments), "joint packing III, product of Gibbs weights", consts)
    if case == "I-a":
        _, s0, alpha0 = _curved_params(f2, lm.c2, alpha_p)
        w0 = gibbs_weight(f2, s0)
        for _, lo, hi, ph in t.phases():
            if ph == PHASE_A:
                t.add(hi, w1, ph, "gibbs1")
            else:
                t.add(geometric_cut(lo, hi), w0, ph, "gibbs2_s0")
                t.add(hi, w2, ph, "gibbs2")
        return AuxSpec(tuple(t.segments),
                       "joint packing I (alpha' >= beta_2'(1)): Gibbs(s1) / Gibbs(s0) / Gibbs(s2), "
                       "phase-matched", dict(consts, s0=s0, alpha0=alpha0))
    if case == "I-b":
        fa = Fraction(alpha_p)
        rates = {"gibbs1": Fraction(_rate(params, w1, PHASE_A)), "p": Fraction(_rate(params, params.p, PHASE_A)),
                 "q": Fraction(_rate(params, params.q, "B"))}
        for _, lo, hi, ph in t.phases():
            if ph == PHASE_A:
                t.add(geometric_cut(lo, hi), w1, ph, "gibbs1")
                t.add(hi, params.p, ph, "p")
            else:
                budget = t.excess(fa, rates, {"gibbs1", "p", "q"})
                length = _balanced_length(budget, fa, rates["q"], params.log_B, hi - lo)
                t.add(lo + length, params.q, ph, "q")
                t.add(hi, w2, ph, "gibbs2")
        return AuxSpec(tuple(t.segments),
                       "joint packing I (alpha' < beta_2'(1)): Gibbs(s1) / p / q / Gibbs(s2)", consts)
    if case == "II":
        th = tangent_h(params, alpha)
        wh = gibbs_weight(f2, th.s)
        fa = Fraction(alpha_p)
        rates = {"gibbs1": Fraction(_rate(params, w1, PHASE_A)),
                 "gibbs2_h": Fraction(_rate(params, wh, "B"))}
        for _, lo, hi, ph in t.phases():
            if ph == PHASE_A:
                t.add(hi, w1, ph, "gibbs1")
            else:
                budget = t.excess(fa, rates, {"gibbs1", "gibbs2_h"})
                length = _balanced_length(budget, fa, rates["gibbs2_h"], params.log_B, hi - lo)
                t.add(lo + length, wh, ph, "gibbs2_h")
                t.add(hi, w2, ph, "gibbs2")
        return AuxSpec(tuple(t.segments),
                       "joint packing II: Gibbs(s1) / Gibbs(s_h) balanced / Gibbs(s2); chord through "
                       "(alpha, beta_1*) and (h, beta_2*(h)) replaces the q segment",
                       dict(consts, s_h=th.s, h=th.alpha_tangent))
    raise ValueError(f"unknown joint packing case {case!r}")


# ---------------------------------------------------------------------------
# deterministic strong-law sequences


@dataclass(frozen=True)
class StrongLawSeq:
    """Running ratios ``R(n) = sum_{k<=n} x_k / sum_{k<=n} b_k`` at the requested levels."""

    levels: tuple[int, ...]
    ratio: np.ndarray
    target: str
    term_bounds: np.ndarray

    def at(self, n: int) -> float:
        return float(self.ratio[self.levels.index(n)])


def _prefix(params: ModelParams, aux: AuxSpec, target: str):
    if target not in ("mu", "mu_prime"):
        raise ValueError("target_measure must be 'mu' or 'mu_prime'")
    xs, bs = [], []
    for seg in aux.segments:
        x, y, b = segment_terms(params, seg)
        xs.append(x if target == "mu" else y)
        bs.append(b)
    return xs, bs


def strong_law_sequence(params: ModelParams, aux: AuxSpec, target_measure: str,
                        levels: Sequence[int]) -> StrongLawSeq:
    """Evaluate ``R(n)`` exactly in the level count, at any depth.

    ``target_measure="mu"`` uses ``x_k = H(p'_k, p_k)``; ``"mu_prime"`` uses
    ``y_k = H(p'_k, p'_k)``.  ``term_bounds`` holds ``(min, max)`` of
    ``x_k / b_k`` over ``k <= n`` (the mediant bound on ``R(n)``).
    """
    xs, bs = _prefix(params, aux, target_measure)
    levels = tuple(int(n) for n in levels)
    order = sorted(range(len(levels)), key=lambda i: levels[i])
    out = np.empty(len(levels))
    bounds = np.empty((len(levels), 2))
    sx = sb = 0.0
    lo_rate, hi_rate = math.inf, -math.inf
    seg_i = 0
    prev_end = 0
    for idx in order:
        n = levels[idx]
        if not 1 <= n <= aux.depth:
            raise ValueError(f"level {n} outside the auxiliary table (1..{aux.depth})")
        while aux.segments[seg_i].end < n:
            seg = aux.segments[seg_i]
            length = seg.end - prev_end
            sx += length * xs[seg_i]
            sb += length * bs[seg_i]
            r = xs[seg_i] / bs[seg_i]
            lo_rate, hi_rate = min(lo_rate, r), max(hi_rate, r)
            prev_end = seg.end
            seg_i += 1
        part = n - prev_end
        r = xs[seg_i] / bs[seg_i]
        out[idx] = (sx + part * xs[seg_i]) / (sb + part * bs[seg_i])
        bounds[idx] = (min(lo_rate, r), max(hi_rate, r))
    return StrongLawSeq(levels, out, target_measure, bounds)


def strong_law_levels(params: ModelParams, aux: AuxSpec, midpoints: int = 8) -> list[int]:
    """Breakpoints, segment ends and geometric midpoints of every segment."""
    levels = set()
    lo = 0
    for seg in aux.segments:
        levels.add(seg.end)
        if seg.end - lo > 1:
            a, b = math.log(max(lo, 1)), math.log(seg.end)
            for k in range(1, midpoints + 1):
                m = int(round(math.exp(a + (b - a) * k / (midpoints + 1))))
                if lo < m <= seg.end:
                    levels.add(m)
        lo = seg.end
    return sorted(levels)


@dataclass(frozen=True)
class StrongLawExtremes:
    liminf: float
    limsup: float
    level_liminf: int
    level_limsup: int


def strong_law_extremes(params: ModelParams, aux: AuxSpec, target_measure: str = "mu",
                        skip_first_phase: bool = True) -> StrongLawExtremes:
    """(min, max) of ``R`` over :func:`strong_law_levels` (optionally past ``N_1``)."""
    levels = strong_law_levels(params, aux)
    if skip_first_phase:
        levels = [n for n in levels if n > params.schedule.N(1)] or levels
    seq = strong_law_sequence(params, aux, target_measure, levels)
    i_lo, i_hi = int(np.argmin(seq.ratio)), int(np.argmax(seq.ratio))
    return StrongLawExtremes(float(seq.ratio[i_lo]), float(seq.ratio[i_hi]), levels[i_lo], levels[i_hi])


# ---------------------------------------------------------------------------
# sampling


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for sample ``index`` of a run with master ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_point(aux: AuxSpec, depth: int, seed: int, index: int = 0) -> np.ndarray:
    """Address of a ``mu'``-random point: digit ``k`` is 0 with probability ``p'_k``."""
    if depth > EXPLICIT_DEPTH_MAX:
        raise ValueError(f"explicit addresses are capped at depth {EXPLICIT_DEPTH_MAX}")
    u = sample_rng(seed, index).random(depth)
    return (u >= aux.weights(depth)).astype(np.uint8)


@dataclass(frozen=True)
class CheckpointSummary:
    level: int
    mean_d_mu: float
    sd_d_mu: float
    min_d_mu: float
    max_d_mu: float
    mean_d_muprime: float
    sd_d_muprime: float
    deterministic_R: float
    deterministic_R_prime: float


@dataclass(frozen=True)
class MonteCarloResult:
    checkpoints: tuple[int, ...]
    d_mu: np.ndarray
    d_muprime: np.ndarray
    summaries: tuple[CheckpointSummary, ...]
    method: str


def _explicit_sample(params, aux, depth, cps_idx, seed, j):
    weights = aux.weights(depth)
    logd, probs = params.level_arrays(depth)
    u = sample_rng(seed, j).random(depth)
    with np.errstate(divide="ignore"):
        lv0, lv1 = np.log(weights), np.log1p(-weights)
    _, d_mu, d_mp = _kernels.bernoulli_walk(u, weights, np.log(probs), np.log1p(-probs), lv0, lv1, logd)
    return d_mu[cps_idx], d_mp[cps_idx]


def _binomial_sample(params, pieces, cps_pos, seed, j):
    rng = sample_rng(seed, j)
    lm = lmp = lb = 0.0
    d_mu = np.empty(len(cps_pos))
    d_mp = np.empty(len(cps_pos))
    c = 0
    for k, (first, last, seg) in enumerate(pieces):
        length = last - first + 1
        zeros = int(rng.binomial(length, seg.weight))
        p = _base_prob(params, seg.phase)
        lm += zeros * math.log(p) + (length - zeros) * math.log1p(-p)
        lmp += float(xlogy(zeros, seg.weight) + xlogy(length - zeros, 1.0 - seg.weight))
        lb += length * _log_div(params, seg.phase)
        while c < len(cps_pos) and cps_pos[c] == k:
            d_mu[c] = -lm / lb
            d_mp[c] = -lmp / lb
            c += 1
    return d_mu, d_mp


def _run_chunk(args):
    params, aux, depth, checkpoints, seed, indices, method = args
    rows_mu, rows_mp = [], []
    if method == "explicit":
        cps_idx = np.asarray(checkpoints, dtype=np.int64) - 1
        for j in indices:
            a, b = _explicit_sample(params, aux, depth, cps_idx, seed, j)
            rows_mu.append(a)
            rows_mp.append(b)
    else:
        pieces = aux.pieces(depth, checkpoints)
        ends = [last for _, last, _ in pieces]
        cps_pos = [ends.index(c) for c in checkpoints]
        for j in indices:
            a, b = _binomial_sample(params, pieces, cps_pos, seed, j)
            rows_mu.append(a)
            rows_mp.append(b)
    return np.array(rows_mu), np.array(rows_mp)


def monte_carlo_local_dims(params: ModelParams, aux: AuxSpec, depth: int, checkpoints: Sequence[int],
                           n_samples: int, seed: int, workers: int = 1,
                           method: str = "auto") -> MonteCarloResult:
    """Local dimensions of ``mu`` and ``mu'`` at ``mu'``-random points.

    Digits are drawn explicitly for ``depth <= 10**6``.  Deeper runs draw
    one binomial zero count per constant-weight piece between consecutive
    checkpoints, which has exactly the same law for the quantities
    reported; this needs ``depth < 2**62``.  Sample ``j`` always uses the stream ``(seed, j)``, so the
    output does not depend on ``workers``.
    """
    checkpoints = tuple(sorted({int(c) for c in checkpoints}))
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > depth:
        raise ValueError("checkpoints must lie in 1..depth")
    if depth > aux.depth:
        raise ValueError(f"depth {depth} beyond the auxiliary table (1..{aux.depth})")
    if method == "auto":
        method = "explicit" if depth <= EXPLICIT_DEPTH_MAX else "binomial"
    if method == "explicit" and depth > EXPLICIT_DEPTH_MAX:
        raise ValueError(f"explicit sampling is capped at depth {EXPLICIT_DEPTH_MAX}")
    if method not in ("explicit", "binomial"):
        raise ValueError("method must be 'auto', 'explicit' or 'binomial'")
    if depth >= BINOMIAL_DEPTH_MAX:
        raise ValueError(f"sampling depth must stay below 2**62, got {depth}")

    idx = list(range(n_samples))
    if workers > 1 and n_samples > 1:
        chunks = [idx[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(params, aux, depth, checkpoints, seed, c, method)
                                               for c in chunks]))
        d_mu = np.empty((n_samples, len(checkpoints)))
        d_mp = np.empty_like(d_mu)
        for c, (a, b) in zip(chunks, parts):
            d_mu[c] = a
            d_mp[c] = b
    else:
        d_mu, d_mp = _run_chunk((params, aux, depth, checkpoints, seed, idx, method))

    det = strong_law_sequence(params, aux, "mu", checkpoints).ratio
    det_p = strong_law_sequence(params, aux, "mu_prime", checkpoints).ratio
    ddof = 1 if n_samples > 1 else 0
    summaries = tuple(
        CheckpointSummary(c, float(d_mu[:, k].mean()), float(d_mu[:, k].std(ddof=ddof)),
                          float(d_mu[:, k].min()), float(d_mu[:, k].max()),
                          float(d_mp[:, k].mean()), float(d_mp[:, k].std(ddof=ddof)),
                          float(det[k]), float(det_p[k]))
        for k, c in enumerate(checkpoints))
    return MonteCarloResult(checkpoints, d_mu, d_mp, summaries, method)
