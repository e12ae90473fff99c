"""Inner loops with two interchangeable backends.

Every kernel exists as a numba-compiled loop and as a pure-numpy
vectorised version.  Both accumulate in the same order, so for the
additive kernels the two backends agree bit for bit.

The backend is chosen once at import time.  Set ``MORANMF_NO_NUMBA=1``
to force numpy; if numba is not importable numpy is used silently.
"""

import math
import os

import numpy as np
from scipy.special import gammaln

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _numba_requested():
    flag = os.environ.get("MORANMF_NO_NUMBA", "").strip().lower()
    return flag not in {"1", "true", "yes", "on"}


BACKEND = "numba" if (numba is not None and _numba_requested()) else "numpy"


# --------------------------------------------------------------------------
# numpy implementations


def _running_ratio_np(num, den):
    return np.cumsum(num) / np.cumsum(den)


def _enumerate_log_masses_np(log0, log1):
    out = np.zeros(1)
    for a, b in zip(log0, log1):
        out = np.stack((out + a, out + b), axis=1).ravel()
    return out


def _bernoulli_walk_np(u, p_prime, log_w0, log_w1, log_v0, log_v1, log_b):
    zero = u < p_prime
    log_mu = np.cumsum(np.where(zero, log_w0, log_w1))
    log_mu_prime = np.cumsum(np.where(zero, log_v0, log_v1))
    log_len = np.cumsum(log_b)
    return int(zero.sum()), -log_mu / log_len, -log_mu_prime / log_len


def _window_log_count_np(k1, k2, a0, a1, b0, b1, lo, hi):
    j1 = np.arange(k1 + 1, dtype=np.float64)[:, None]
    j2 = np.arange(k2 + 1, dtype=np.float64)[None, :]
    log_mass = (j1 * a0 + (k1 - j1) * a1) + (j2 * b0 + (k2 - j2) * b1)
    inside = (log_mass >= lo) & (log_mass <= hi)
    if not inside.any():
        return -np.inf
    lc1 = gammaln(k1 + 1.0) - gammaln(j1 + 1.0) - gammaln(k1 - j1 + 1.0)
    lc2 = gammaln(k2 + 1.0) - gammaln(j2 + 1.0) - gammaln(k2 - j2 + 1.0)
    terms = np.broadcast_to(lc1 + lc2, inside.shape)[inside]
    top = terms.max()
    return float(top + np.log(np.exp(terms - top).sum()))


# --------------------------------------------------------------------------
# numba implementations

if numba is not None:

    @numba.njit(cache=True)
    def _running_ratio_nb(num, den):
        out = np.empty(num.shape[0])
        s = 0.0
        t = 0.0
        for k in range(num.shape[0]):
            s += num[k]
            t += den[k]
            out[k] = s / t
        return out

    @numba.njit(cache=True)
    def _enumerate_log_masses_nb(log0, log1):
        n = log0.shape[0]
        out = np.zeros(1 << n)
        size = 1
        for k in range(n):
            # expand in place from the back so parents are read before overwritten
            for i in range(size - 1, -1, -1):
                parent = out[i]
                out[2 * i] = parent + log0[k]
                out[2 * i + 1] = parent + log1[k]
            size *= 2
        return out

    @numba.njit(cache=True)
    def _bernoulli_walk_nb(u, p_prime, log_w0, log_w1, log_v0, log_v1, log_b):
        m = u.shape[0]
        d_mu = np.empty(m)
        d_mu_prime = np.empty(m)
        zeros = 0
        s_mu = 0.0
        s_mu_prime = 0.0
        s_len = 0.0
        for k in range(m):
            if u[k] < p_prime[k]:
                zeros += 1
                s_mu += log_w0[k]
                s_mu_prime += log_v0[k]
            else:
                s_mu += log_w1[k]
                s_mu_prime += log_v1[k]
            s_len += log_b[k]
            d_mu[k] = -s_mu / s_len
            d_mu_prime[k] = -s_mu_prime / s_len
        return zeros, d_mu, d_mu_prime

    @numba.njit(cache=True)
    def _window_log_count_nb(k1, k2, a0, a1, b0, b1, lo, hi):
        lf1 = math.lgamma(k1 + 1.0)
        lf2 = math.lgamma(k2 + 1.0)
        top = -np.inf
        # two passes: find the largest admissible term, then sum relative to it
        for j1 in range(k1 + 1):
            m1 = j1 * a0 + (k1 - j1) * a1
            c1 = lf1 - math.lgamma(j1 + 1.0) - math.lgamma(k1 - j1 + 1.0)
            for j2 in range(k2 + 1):
                m = m1 + (j2 * b0 + (k2 - j2) * b1)
                if m >= lo and m <= hi:
                    t = c1 + lf2 - math.lgamma(j2 + 1.0) - math.lgamma(k2 - j2 + 1.0)
                    if t > top:
                        top = t
        if top == -np.inf:
            return top
        acc = 0.0
        for j1 in range(k1 + 1):
            m1 = j1 * a0 + (k1 - j1) * a1
            c1 = lf1 - math.lgamma(j1 + 1.0) - math.lgamma(k1 - j1 + 1.0)
            for j2 in range(k2 + 1):
                m = m1 + (j2 * b0 + (k2 - j2) * b1)
                if m >= lo and m <= hi:
                    t = c1 + lf2 - math.lgamma(j2 + 1.0) - math.lgamma(k2 - j2 + 1.0)
                    acc += math.exp(t - top)
        return top + math.log(acc)


NUMPY = {
    "running_ratio": _running_ratio_np,
    "enumerate_log_masses": _enumerate_log_masses_np,
    "bernoulli_walk": _bernoulli_walk_np,
    "window_log_count": _window_log_count_np,
}

NUMBA = None
if numba is not None:
    NUMBA = {
        "running_ratio": _running_ratio_nb,
        "enumerate_log_masses": _enumerate_log_masses_nb,
        "bernoulli_walk": _bernoulli_walk_nb,
        "window_log_count": _window_log_count_nb,
    }

_ACTIVE = NUMBA if BACKEND == "numba" else NUMPY


def running_ratio(num, den):
    """Running ratio ``cumsum(num) / cumsum(den)``."""
    return _ACTIVE["running_ratio"](
        np.ascontiguousarray(num, dtype=np.float64),
        np.ascontiguousarray(den, dtype=np.float64),
    )


def enumerate_log_masses(log0, log1):
    """Log-masses of all ``2**n`` level-n cylinders in lexicographic order.

    ``log0[k]`` / ``log1[k]`` are the log child weights at level ``k + 1``.
    """
    log0 = np.ascontiguousarray(log0, dtype=np.float64)
    log1 = np.ascontiguousarray(log1, dtype=np.float64)
    if log0.shape != log1.shape or log0.ndim != 1:
        raise ValueError("log0 and log1 must be 1-d arrays of equal length")
    if log0.shape[0] > 26:
        raise ValueError("enumeration capped at n <= 26")
    return _ACTIVE["enumerate_log_masses"](log0, log1)


def bernoulli_walk(u, p_prime, log_w0, log_w1, log_v0, log_v1, log_b):
    """Turn uniforms into digits and accumulate two local-dimension paths.

    A digit is 0 when ``u[k] < p_prime[k]``.  Returns the number of zeros and
    the running ratios ``-sum(log w) / sum(log b)`` for the target measure
    (weights ``w``) and the sampling measure (weights ``v``).
    """
    arrs = [np.ascontiguousarray(a, dtype=np.float64)
            for a in (u, p_prime, log_w0, log_w1, log_v0, log_v1, log_b)]
    zeros, d_mu, d_mu_prime = _ACTIVE["bernoulli_walk"](*arrs)
    return int(zeros), d_mu, d_mu_prime


def window_log_count(k1, k2, a0, a1, b0, b1, lo, hi):
    """Log of the number of (k1, k2)-phase cylinders with log-mass in [lo, hi].

    A cylinder with ``j1`` zeros among the ``k1`` first-phase levels and
    ``j2`` among the ``k2`` second-phase levels has log-mass
    ``j1*a0 + (k1-j1)*a1 + j2*b0 + (k2-j2)*b1``.  Returns ``-inf`` for an
    empty window.
    """
    return float(_ACTIVE["window_log_count"](
        int(k1), int(k2), float(a0), float(a1), float(b0), float(b1),
        float(lo), float(hi)))
