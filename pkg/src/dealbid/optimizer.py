"""Bid optimization: bounded Brent search, multi-start, and the recompute policy.

The expected-profit curve is neither concave nor unimodal in the bid, so a
single local search can stall on an inferior peak. ``next_bid`` therefore
searches from several random points for a deal's first impressions and, after
that, warm-starts one search from the previous optimum, and only when a click
arrived or enough opportunities have gone by since the last search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from numba import njit

from . import _binom
from .profit import AUTO_NORMAL_THRESHOLD, Deal, DealState, bid_objective
from .winmodel import FIRST_PRICE, WinModel

_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
_SQRT_EPS = math.sqrt(np.finfo(float).eps)


class NonFiniteObjective(ArithmeticError):
    """The objective returned nan/inf; ``bid`` is where it happened."""

    def __init__(self, bid: float, value: float):
        super().__init__(f"objective is not finite at bid={bid!r} (got {value!r})")
        self.bid = bid
        self.value = value


class DealExpired(RuntimeError):
    pass


@dataclass(frozen=True)
class BidBounds:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bid bounds need lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def of(cls, win: WinModel) -> "BidBounds":
        return cls(*win.bounds())


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for ``next_bid``.

    ``abs_tol=None`` means ``(hi - lo) * 1e-5`` of the bid range in use.
    """

    abs_tol: Optional[float] = None
    max_iters: int = 100
    multi_start_impressions: int = 20
    starts_per_impression: int = 8
    recompute_interval: int = 32
    seed: int = 0
    mode: str = "auto"
    normal_threshold: float = AUTO_NORMAL_THRESHOLD

    def __post_init__(self):
        if self.abs_tol is not None and not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.multi_start_impressions < 1:
            raise ValueError("multi_start_impressions must be at least 1")
        if self.starts_per_impression < 1:
            raise ValueError("starts_per_impression must be at least 1")
        if self.recompute_interval < 1:
            raise ValueError("recompute_interval must be at least 1")

    def tolerance(self, bounds: BidBounds) -> float:
        return self.abs_tol if self.abs_tol is not None else (bounds.hi - bounds.lo) * 1e-5


def _as_bounds(bounds) -> BidBounds:
    return bounds if isinstance(bounds, BidBounds) else BidBounds(*bounds)


def _make_search(evaluate):
    """Build Brent's bounded minimizer around ``evaluate(x, args)``.

    Written once and instantiated twice: as plain Python for arbitrary
    callables and compiled for the built-in profit objective. Returns
    ``(x, f(x), ok)``; ``ok`` is False when a non-finite value stopped the
    search, with ``x`` the offending point.
    """

    def search(args, a, b, start, tol, max_iters):
        lo, hi = a, b
        x = w = v = start
        fx = -evaluate(x, args)
        if not math.isfinite(fx):
            return x, -fx, False
        fw = fv = fx
        d = 0.0
        e = 0.0
        for _ in range(max_iters):
            mid = 0.5 * (a + b)
            tol1 = _SQRT_EPS * abs(x) + tol / 3.0
            tol2 = 2.0 * tol1
            if abs(x - mid) <= tol2 - 0.5 * (b - a):
                break
            parabolic = False
            if abs(e) > tol1:
                r = (x - w) * (fx - fv)
                q = (x - v) * (fx - fw)
                p = (x - v) * q - (x - w) * r
                q = 2.0 * (q - r)
                if q > 0.0:
                    p = -p
                q = abs(q)
                e_prev = e
                e = d
                if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                    d = p / q
                    u = x + d
                    if u - a < tol2 or b - u < tol2:
                        d = tol1 if x < mid else -tol1
                    parabolic = True
            if not parabolic:
                e = (b - x) if x < mid else (a - x)
                d = _GOLDEN * e
            if abs(d) >= tol1:
                u = x + d
            elif d > 0.0:
                u = x + tol1
            else:
                u = x - tol1
            u = min(max(u, lo), hi)
            fu = -evaluate(u, args)
            if not math.isfinite(fu):
                return u, -fu, False
            if fu <= fx:
                if u >= x:
                    a = x
                else:
                    b = x
                v, fv = w, fw
                w, fw = x, fx
                x, fx = u, fu
            else:
                if u < x:
                    a = u
                else:
                    b = u
                if fu <= fw or w == x:
                    v, fv = w, fw
                    w, fw = u, fu
                elif fu <= fv or v == x or v == w:
                    v, fv = u, fu
        return x, -fx, True

    return search


def _call(x, f):
    return f(x)


_search_py = _make_search(_call)
_search_profit = njit(_make_search(_binom.profit_value))


def brent_maximize(f: Callable[[float], float], bounds, start: float, cfg: Optional[OptimizerConfig] = None,
                   *, abs_tol: Optional[float] = None, max_iters: Optional[int] = None
                   ) -> tuple[float, float]:
    """Local maximum of ``f`` on ``bounds`` by Brent's method, starting at ``start``.

    Parabolic interpolation through the three best points so far, falling back
    to a golden-section step whenever the parabola is unusable. ``f`` is never
    evaluated outside the bounds. Returns ``(bid, f(bid))``.

    Raises:
        NonFiniteObjective: ``f`` produced nan or inf.
    """
    b_ = _as_bounds(bounds)
    cfg = cfg or OptimizerConfig()
    tol = abs_tol if abs_tol is not None else cfg.tolerance(b_)
    iters = max_iters if max_iters is not None else cfg.max_iters
    if not b_.lo <= start <= b_.hi:
        raise ValueError(f"start {start!r} outside bounds [{b_.lo}, {b_.hi}]")
    params = getattr(f, "params", None)
    if params is not None:
        x, fx, ok = _search_profit(params, b_.lo, b_.hi, float(start), float(tol), int(iters))
    else:
        x, fx, ok = _search_py(f, b_.lo, b_.hi, start, tol, iters)
    if not ok:
        raise NonFiniteObjective(x, fx)
    return x, fx


def multi_start_maximize(f: Callable[[float], float], bounds, starts: Iterable[float],
                         cfg: Optional[OptimizerConfig] = None) -> tuple[float, float]:
    """Best of independent Brent searches, one per start.

    Both bound endpoints are evaluated as extra candidates, since a maximum
    sitting exactly on an endpoint is common (a hopeless deal should bid the
    minimum). A start whose search hits a non-finite value is dropped; if every
    start fails the last error is raised.
    """
    b_ = _as_bounds(bounds)
    starts = list(starts)
    if not starts:
        raise ValueError("multi_start_maximize needs at least one start")
    best_x, best_f = None, -math.inf
    err = None
    for s in starts:
        try:
            x, fx = brent_maximize(f, b_, s, cfg)
        except NonFiniteObjective as exc:
            err = exc
            continue
        if fx > best_f:
            best_x, best_f = x, fx
    if best_x is None:
        raise err
    for edge in (b_.lo, b_.hi):
        fe = f(edge)
        if math.isfinite(fe) and fe > best_f:
            best_x, best_f = edge, fe
    return best_x, best_f


def _random_starts(bounds: BidBounds, cfg: OptimizerConfig, t: int) -> np.ndarray:
    rng = np.random.default_rng((cfg.seed, t))
    return rng.uniform(bounds.lo, bounds.hi, cfg.starts_per_impression)


def next_bid(deal: Deal, state: DealState, win: WinModel, pay=FIRST_PRICE,
             cfg: Optional[OptimizerConfig] = None) -> float:
    """Real-time bid for the current visit, updating the policy fields of ``state``.

    * During the deal's first ``multi_start_impressions`` bids: full multi-start search.
    * Afterwards, re-optimize (one search warm-started at the cached bid) if a
      click arrived since the last search or ``recompute_interval``
      opportunities have passed; otherwise return the cached bid untouched.

    Random starts depend only on ``(cfg.seed, state.t)``, so the bid sequence
    is reproducible from the deal's history.
    """
    cfg = cfg or OptimizerConfig()
    if state.remaining_visits(deal) < 1:
        raise DealExpired(f"deal expired at t={state.t} (e={deal.e})")
    bounds = BidBounds.of(win)

    if state.starts_done < cfg.multi_start_impressions or state.cached_bid is None:
        f = bid_objective(deal, state, win, pay, cfg.mode, threshold=cfg.normal_threshold)
        bid, _ = multi_start_maximize(f, bounds, _random_starts(bounds, cfg, state.t), cfg)
        if state.starts_done < cfg.multi_start_impressions:
            state.starts_done += 1
        return _remember(state, bid)

    state.opportunities_since_recompute += 1
    if (state.clicks == state.clicks_at_recompute
            and state.opportunities_since_recompute < cfg.recompute_interval):
        return state.cached_bid

    f = bid_objective(deal, state, win, pay, cfg.mode, threshold=cfg.normal_threshold)
    jitter = 10.0 * cfg.tolerance(bounds) * (1.0 if state.t % 2 == 0 else -1.0)
    start = min(max(state.cached_bid + jitter, bounds.lo), bounds.hi)
    try:
        bid, _ = brent_maximize(f, bounds, start, cfg)
    except NonFiniteObjective:
        bid = state.cached_bid
    return _remember(state, bid)


def _remember(state: DealState, bid: float) -> float:
    state.cached_bid = bid
    state.opportunities_since_recompute = 0
    state.clicks_at_recompute = state.clicks
    return bid


def optimal_bid(deal: Deal, state: DealState, win: WinModel, pay=FIRST_PRICE,
                cfg: Optional[OptimizerConfig] = None) -> tuple[float, float]:
    """One-off multi-start optimum ``(bid, expected_profit)`` without touching ``state``."""
    cfg = cfg or OptimizerConfig()
    bounds = BidBounds.of(win)
    f = bid_objective(deal, state, win, pay, cfg.mode, threshold=cfg.normal_threshold)
    bid, value = multi_start_maximize(f, bounds, _random_starts(bounds, cfg, state.t), cfg)
    return bid, value - state.spend
