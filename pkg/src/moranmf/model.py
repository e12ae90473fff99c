"""Two-phase Moran sets and measures, plus the general varying-ratio model.

Levels are numbered from 1.  Level ``n`` uses contraction divisor ``A``
when ``N_{2i} < n <= N_{2i+1}`` for some ``i >= 0`` (with ``N_0 = 0``) and
``B`` otherwise; the left child receives mass fraction ``p`` resp. ``q``.
All lengths and masses are handled as natural logarithms.

Level indices may be astronomically large (``2**64`` and beyond); they are
kept as Python ints and every count is obtained by breakpoint arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import AddressTooShort, InfeasibleParameters, PointNotCovered, ScheduleError

PHASE_A = "A"
PHASE_B = "B"

SCHEDULE_KINDS = ("factorial", "two_pow_i_squared", "explicit")

# Generated schedules are extended on demand; this only guards runaway loops.
_MAX_GENERATED_INDEX = 10_000


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class LevelSchedule:
    """Increasing breakpoints ``N_1 < N_2 < ...`` with ``N_0 = 0``.

    ``kind`` is one of ``"factorial"`` (``N_i = i!``),
    ``"two_pow_i_squared"`` (``N_i = 2**(i*i)``) or ``"explicit"``.
    Generated kinds extend indefinitely; an explicit list ends at its last
    entry.  ``max_index`` is the truncation used for reporting and as the
    default depth of sweeps.
    """

    kind: str = "two_pow_i_squared"
    explicit: tuple[int, ...] = ()
    max_index: int | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ScheduleError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit":
            pts = tuple(int(v) for v in self.explicit)
            if not pts:
                raise ScheduleError("explicit schedule needs at least one breakpoint")
            prev = 0
            for v in pts:
                if v <= prev:
                    raise ScheduleError("schedule must be strictly increasing with N_1 >= 1")
                prev = v
            object.__setattr__(self, "explicit", pts)
            if self.max_index is not None and self.max_index > len(pts):
                raise ScheduleError("max_index exceeds the explicit schedule length")

    @classmethod
    def factorial(cls, max_index: int | None = None) -> "LevelSchedule":
        return cls("factorial", max_index=max_index)

    @classmethod
    def two_pow_i_squared(cls, max_index: int | None = None) -> "LevelSchedule":
        return cls("two_pow_i_squared", max_index=max_index)

    @classmethod
    def from_list(cls, breakpoints: Iterable[int]) -> "LevelSchedule":
        return cls("explicit", tuple(breakpoints))

    @property
    def depth(self) -> int:
        """Number of breakpoints in the truncation."""
        if self.max_index is not None:
            return self.max_index
        if self.kind == "explicit":
            return len(self.explicit)
        return 8

    @property
    def extendable(self) -> bool:
        return self.kind != "explicit"

    def N(self, i: int) -> int:
        """Breakpoint ``N_i`` (``N_0 = 0``)."""
        if i < 0:
            raise ValueError("breakpoint index must be >= 0")
        if i == 0:
            return 0
        if self.kind == "factorial":
            return math.factorial(i)
        if self.kind == "two_pow_i_squared":
            return 1 << (i * i)
        if i > len(self.explicit):
            raise ScheduleError(
                f"schedule too short: N_{i} requested, explicit list has {len(self.explicit)} entries")
        return self.explicit[i - 1]

    def breakpoints(self, count: int | None = None) -> list[int]:
        """``[N_1, ..., N_count]`` (default: the truncation depth)."""
        count = self.depth if count is None else count
        return [self.N(i) for i in range(1, count + 1)]

    def covers(self, n: int) -> bool:
        return self.extendable or n <= self.explicit[-1]

    def phase_index(self, n: int) -> int:
        """The index ``i >= 1`` with ``N_{i-1} < n <= N_i``."""
        if n < 1:
            raise ValueError("levels start at 1")
        if not self.covers(n):
            raise ScheduleError(f"schedule too short: level {n} beyond N_last={self.explicit[-1]}")
        i = 1
        while self.N(i) < n:
            i += 1
            if i > _MAX_GENERATED_INDEX:  # pragma: no cover
                raise ScheduleError("breakpoint search did not terminate")
        return i

    def regime(self, n: int) -> str:
        """``"A"`` if level ``n`` lies in some ``(N_{2i}, N_{2i+1}]``, else ``"B"``."""
        return PHASE_A if self.phase_index(n) % 2 == 1 else PHASE_B

    def level_counts(self, n: int) -> tuple[int, int]:
        """Numbers ``(k1, k2)`` of A- and B-levels among ``1..n``."""
        n = int(n)
        if n < 0:
            raise ValueError("n must be >= 0")
        if n and not self.covers(n):
            raise ScheduleError(f"schedule too short: level {n} beyond N_last={self.explicit[-1]}")
        k1 = k2 = 0
        i = 1
        lo = 0
        while lo < n:
            hi = self.N(i)
            seg = min(n, hi) - lo
            if i % 2:
                k1 += seg
            else:
                k2 += seg
            lo = hi
            i += 1
        return k1, k2

    def phases(self, n_max: int) -> list[tuple[int, int, str]]:
        """Maximal constant-phase runs ``(first, last, phase)`` covering ``1..n_max``."""
        out = []
        lo = 0
        i = 1
        while lo < n_max:
            hi = min(self.N(i), n_max)
            out.append((lo + 1, hi, PHASE_A if i % 2 else PHASE_B))
            lo = self.N(i)
            i += 1
        return out

    def growth_ratios(self, count: int | None = None) -> list[float]:
        pts = self.breakpoints(count)
        return [b / a for a, b in zip(pts, pts[1:])]

    def describe(self) -> str:
        if self.kind == "explicit":
            return "explicit:" + ",".join(str(v) for v in self.explicit)
        return self.kind


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ModelParams:
    """Two-phase parameters ``(A, B, p, q)`` with a level schedule.

    Construction does not enforce the constraints so that infeasible sets
    can still be reported by :func:`validate`; operations that need a valid
    model call :func:`require_valid`.
    """

    A: float
    B: float
    p: float
    q: float
    schedule: LevelSchedule = field(default_factory=LevelSchedule)

    @property
    def log_A(self) -> float:
        return math.log(self.A)

    @property
    def log_B(self) -> float:
        return math.log(self.B)

    @property
    def divisor_bounds(self) -> tuple[float, float]:
        return min(self.A, self.B), max(self.A, self.B)

    def divisor(self, n: int) -> float:
        return self.A if self.schedule.regime(n) == PHASE_A else self.B

    def prob(self, n: int) -> float:
        return self.p if self.schedule.regime(n) == PHASE_A else self.q

    def log_length(self, n: int) -> float:
        """``log |I_w|`` shared by every level-n cylinder."""
        k1, k2 = self.schedule.level_counts(n)
        return -(k1 * self.log_A + k2 * self.log_B)

    def level_arrays(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-level ``(log divisor, left probability)`` for levels ``1..n_max``."""
        logd = np.empty(n_max)
        probs = np.empty(n_max)
        for first, last, phase in self.schedule.phases(n_max):
            sl = slice(first - 1, last)
            if phase == PHASE_A:
                logd[sl], probs[sl] = self.log_A, self.p
            else:
                logd[sl], probs[sl] = self.log_B, self.q
        return logd, probs


@dataclass(frozen=True)
class GeneralParams:
    """Varying-ratio model: level ``n`` has divisor ``A_n`` and left mass ``p_n``.

    ``a_bounds = (A_low, A_high)`` and ``p_bounds = (a, b)`` are the uniform
    bounds the sequences must respect; they are checked whenever a level is
    evaluated.
    """

    a_seq: Callable[[int], float]
    p_seq: Callable[[int], float]
    a_bounds: tuple[float, float]
    p_bounds: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.a_bounds
        if not (2 < lo <= hi < math.inf):
            raise InfeasibleParameters("need 2 < A_low <= A_high < inf")
        a, b = self.p_bounds
        if not (0 < a <= b < 1):
            raise InfeasibleParameters("need 0 < a <= b < 1 for the mass bounds")

    @property
    def divisor_bounds(self) -> tuple[float, float]:
        return self.a_bounds

    def divisor(self, n: int) -> float:
        v = float(self.a_seq(n))
        lo, hi = self.a_bounds
        if not lo <= v <= hi:
            raise InfeasibleParameters(f"A_{n} = {v} outside [{lo}, {hi}]")
        return v

    def prob(self, n: int) -> float:
        v = float(self.p_seq(n))
        a, b = self.p_bounds
        if not a <= v <= b:
            raise InfeasibleParameters(f"p_{n} = {v} outside [{a}, {b}]")
        return v

    def level_arrays(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        logd = np.array([math.log(self.divisor(n)) for n in range(1, n_max + 1)])
        probs = np.array([self.prob(n) for n in range(1, n_max + 1)])
        return logd, probs


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    hard: bool = True


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    growth_ratios: tuple[float, ...]

    @property
    def ok(self) -> bool:
        """True when every hard constraint passes (warnings allowed)."""
        return all(c.passed for c in self.checks if c.hard)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def text(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else ("FAIL" if c.hard else "WARN")
            lines.append(f"[{status}] {c.name}: {c.detail}")
        ratios = ", ".join(f"{r:.6g}" for r in self.growth_ratios)
        lines.append(f"[INFO] schedule growth N_(i+1)/N_i over truncation: {ratios}")
        lines.append("[INFO] lim N_(i+1)/N_i = inf: unverifiable at finite truncation")
        return "\n".join(lines)


def validate(params: ModelParams) -> ValidationReport:
    """Report every model constraint with pass/fail; never raises."""
    A, B, p, q = params.A, params.B, params.p, params.q
    checks = [
        Check("A > B", A > B, f"A={A!r}, B={B!r}"),
        Check("B > 2", B > 2, f"B={B!r}"),
        Check("0 < p <= 1/2", 0 < p <= 0.5, f"p={p!r}"),
        Check("0 < q <= 1/2", 0 < q <= 0.5, f"q={q!r}"),
    ]
    if A > 1 and B > 1 and 0 < p < 1 and 0 < q < 1:
        lhs = -math.log(p) / math.log(A)
        rhs = -math.log1p(-q) / math.log(B)
        rel = "<" if lhs < rhs else ">="
        checks.append(Check("-log p/log A < -log(1-q)/log B", lhs < rhs,
                            f"{lhs:.7f} {rel} {rhs:.7f}", hard=False))
    else:
        checks.append(Check("-log p/log A < -log(1-q)/log B", False,
                            "not evaluable", hard=False))
    try:
        ratios = tuple(params.schedule.growth_ratios())
    except ScheduleError:
        ratios = ()
    return ValidationReport(tuple(checks), ratios)


def require_valid(params: ModelParams) -> None:
    """Raise :class:`InfeasibleParameters` if a hard constraint fails."""
    report = validate(params)
    if not report.ok:
        bad = "; ".join(f"{c.name} ({c.detail})" for c in report.failures if c.hard)
        raise InfeasibleParameters(f"infeasible parameters: {bad}")


# ---------------------------------------------------------------------------
# entropy


def mixed_entropy(p_tilde: float, p: float) -> float:
    """``H(p~, p) = -p~ log p - (1 - p~) log(1 - p)`` in nats."""
    if p <= 0 or p >= 1:
        raise ValueError("degenerate base probability")
    if not 0 <= p_tilde <= 1:
        raise ValueError("p_tilde must lie in [0, 1]")
    h = 0.0
    if p_tilde > 0:
        h -= p_tilde * math.log(p)
    if p_tilde < 1:
        h -= (1 - p_tilde) * math.log1p(-p)
    return h


# ---------------------------------------------------------------------------
# cylinders and points


def as_digits(word: str | Sequence[int] | np.ndarray) -> np.ndarray:
    """Digits of a word as a uint8 array; the alphabet must be {0, 1}."""
    if isinstance(word, str):
        if word.strip("01"):
            raise ValueError("words are over the alphabet {0, 1}")
        return np.frombuffer(word.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(word)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("words are over the alphabet {0, 1}")
    return arr.astype(np.uint8).ravel()


def word_str(digits: Iterable[int]) -> str:
    return "".join("1" if d else "0" for d in digits)


@dataclass(frozen=True)
class LogCylinder:
    word: str
    left: float
    log_length: float
    log_measure: float

    @property
    def length(self) -> float:
        return math.exp(self.log_length)

    @property
    def measure(self) -> float:
        return math.exp(self.log_measure)


def cylinder(params: ModelParams | GeneralParams, word) -> LogCylinder:
    """Left endpoint, log-length and log-measure of ``I_w``."""
    digits = as_digits(word)
    left = 0.0
    log_len = 0.0
    log_mu = 0.0
    for k, d in enumerate(digits, start=1):
        a = params.divisor(k)
        pk = params.prob(k)
        length = math.exp(log_len)
        if d:
            left += length - length / a
            log_mu += math.log1p(-pk)
        else:
            log_mu += math.log(pk)
        log_len -= math.log(a)
    return LogCylinder(word_str(digits), left, log_len, log_mu)


def locate(params: ModelParams | GeneralParams, x: float, n: int) -> str:
    """The level-n word whose cylinder contains ``x``.

    Ties on a shared endpoint resolve to the left cylinder.  Raises
    :class:`PointNotCovered` when ``x`` falls in a gap.
    """
    if not 0.0 <= x <= 1.0:
        raise PointNotCovered(x, 0)
    left, length = 0.0, 1.0
    out = []
    for k in range(1, n + 1):
        child = length / params.divisor(k)
        if x <= left + child:
            out.append("0")
        elif x >= left + length - child:
            out.append("1")
            left = left + length - child
        else:
            raise PointNotCovered(x, k)
        length = child
    return "".join(out)


@dataclass(frozen=True)
class BallCylinderBounds:
    n: int
    n_prime: int
    length_n: float
    length_n_prime: float
    bound_check: bool


def _neighbor_gaps(params, digits, k, x):
    """Distance from ``x`` to the nearest point of the set outside ``I_{w[:k]}``."""
    pre = digits[:k]
    best = math.inf
    ones = np.flatnonzero(pre)
    zeros = np.flatnonzero(pre == 0)
    if ones.size:
        # left neighbour: flip the last 1 to 0 and take the all-ones tail
        j = ones[-1]
        w = np.concatenate((pre[:j], [0], np.ones(k - j - 1, dtype=np.uint8)))
        c = cylinder(params, w)
        best = min(best, x - (c.left + c.length))
    if zeros.size:
        j = zeros[-1]
        w = np.concatenate((pre[:j], [1], np.zeros(k - j - 1, dtype=np.uint8)))
        c = cylinder(params, w)
        best = min(best, c.left - x)
    return best


def ball_cylinder_bounds(params: ModelParams | GeneralParams, word, r: float) -> BallCylinderBounds:
    """Compare the ball ``B(x, r)`` with the cylinders containing ``x``.

    ``x`` is the point of the set with address ``word`` followed by zeros,
    i.e. the left endpoint of ``I_word``.  ``n`` is the smallest level with
    ``I_n(x)`` inside the ball, ``n_prime`` the largest level whose cylinder
    contains every point of the set in the ball.  Both must be decided
    within the given address, else :class:`AddressTooShort` is raised.
    """
    if not 0 < r < 1:
        raise ValueError("radius must lie in (0, 1)")
    digits = as_digits(word)
    depth = digits.size
    x = cylinder(params, digits).left

    n = None
    for k in range(depth + 1):
        c = cylinder(params, digits[:k])
        if c.left >= x - r and c.left + c.length <= x + r:
            n = k
            break
    if n is None:
        raise AddressTooShort(f"need an address deeper than {depth} to reach I_n(x) inside the ball")

    n_prime = None
    for k in range(1, depth + 1):
        if _neighbor_gaps(params, digits, k, x) <= r:
            n_prime = k - 1
            break
    if n_prime is None:
        raise AddressTooShort(f"need an address deeper than {depth} to bound n'")

    len_n = cylinder(params, digits[:n]).length
    len_np = cylinder(params, digits[:n_prime]).length
    a_lo, a_hi = params.divisor_bounds
    ok = (r / a_hi <= len_n * (1 + 1e-12) and len_n <= 2 * r * (1 + 1e-12)
          and len_np <= 2 * a_lo * r / (a_lo - 2) * (1 + 1e-12))
    return BallCylinderBounds(n, n_prime, len_n, len_np, ok)
