"""Compiled binomial kernels behind ``profit.phi`` / ``profit.theta``.

Everything here works on plain floats and ints so the objective can be
evaluated a few hundred times per impression without Python overhead.
"""

import math

import numpy as np
from numba import njit

EXACT, TAIL, NORMAL, AUTO = 0, 1, 2, 3
MODES = {"exact": EXACT, "tail": TAIL, "normal": NORMAL, "auto": AUTO}

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_NEGLIGIBLE = 1e-24


@njit(cache=True)
def log_binom_pmf(j, u, p):
    return (math.lgamma(u + 1.0) - math.lgamma(j + 1.0) - math.lgamma(u - j + 1.0)
            + j * math.log(p) + (u - j) * math.log1p(-p))


@njit(cache=True)
def binom_pmf(j, u, p):
    """P(Bin(u, p) = j), zero outside ``0..u``."""
    if j < 0 or j > u:
        return 0.0
    if p <= 0.0:
        return 1.0 if j == 0 else 0.0
    if p >= 1.0:
        return 1.0 if j == u else 0.0
    return math.exp(log_binom_pmf(j, u, p))


@njit(cache=True)
def binom_range_sums(lo, hi, u, p):
    """Return (sum pmf, sum j*pmf) over j in [lo, hi] for 0 < p < 1.

    The term nearest the mode is computed with log-gamma; the rest follow by
    the ratio recurrence outward from it, stopping once terms drop below
    ``_NEGLIGIBLE`` of the anchor (the flanks decay geometrically there, so the
    rest cannot change a double sum). Both flanks are then added smallest-first.
    """
    if lo < 0:
        lo = 0
    if hi > u:
        hi = u
    if hi < lo:
        return 0.0, 0.0
    mode = int(math.floor((u + 1) * p))
    a = min(max(mode, lo), hi)
    q = p / (1.0 - p)
    buf = np.empty(hi - lo + 1)
    ta = math.exp(log_binom_pmf(a, u, p))
    buf[a - lo] = ta
    cut = ta * _NEGLIGIBLE

    jr = a
    t = ta
    while jr < hi and t > cut:
        t = t * (u - jr) / (jr + 1.0) * q
        jr += 1
        buf[jr - lo] = t
    jl = a
    t = ta
    while jl > lo and t > cut:
        t = t * jl / ((u - jl + 1.0) * q)
        jl -= 1
        buf[jl - lo] = t

    s0 = 0.0
    s1 = 0.0
    for j in range(jl, a + 1):
        s0 += buf[j - lo]
        s1 += j * buf[j - lo]
    r0 = 0.0
    r1 = 0.0
    for j in range(jr, a, -1):
        r0 += buf[j - lo]
        r1 += j * buf[j - lo]
    return s0 + r0, s1 + r1


@njit(cache=True)
def phi_theta(r, u, p, mode, threshold, printed_theta):
    """(P(J >= r), E[J; J >= r]) for J ~ Bin(u, p)."""
    mean = u * p
    if r <= 0:
        return 1.0, mean
    if r > u:
        return 0.0, 0.0
    if p <= 0.0:
        return 0.0, 0.0
    if p >= 1.0:
        return 1.0, float(u)
    var = mean * (1.0 - p)
    if mode == AUTO:
        mode = NORMAL if var >= threshold else TAIL
    if mode == EXACT:
        s0, s1 = binom_range_sums(r, u, u, p)
        return min(s0, 1.0), min(s1, mean)
    if mode == TAIL:
        s0, s1 = binom_range_sums(0, r - 1, u, p)
        phi = 1.0 - s0
        theta = mean - s1
        return min(max(phi, 0.0), 1.0), max(theta, 0.0)
    sigma = math.sqrt(var)
    z = (r - 0.5 - mean) / sigma
    upper = 0.5 * math.erfc(z / _SQRT2)
    dens = _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    if printed_theta:
        return upper, sigma * dens + mean
    return upper, sigma * dens + mean * upper


UNIFORM, GAUSSIAN, CONSTANT = 0, 1, 2


@njit(cache=True)
def win_prob(bid, kind, w1, w2, k):
    """d(bid) for the built-in models; ``k`` is the number of competitors."""
    if kind == CONSTANT:
        return w1
    if k == 0:
        return 1.0
    if kind == UNIFORM:
        x = (bid - w1) / (w2 - w1)
        if x <= 0.0:
            return 0.0
        if x >= 1.0:
            return 1.0
        return x ** k
    return (0.5 * math.erfc(-(bid - w1) / w2 / _SQRT2)) ** k


@njit(cache=True)
def profit_value(bid, params):
    """Expected profit minus sunk spend under first-price payment.

    ``params = (kind, w1, w2, k, r, u, c, rho, mu, mode, threshold)``.
    """
    kind, w1, w2, k, r, u, c, rho, mu, mode, threshold = params
    d = win_prob(bid, kind, w1, w2, k)
    ph, th = phi_theta(r, u, mu * d, mode, threshold, False)
    return c * rho * ph + rho * th - u * d * bid
