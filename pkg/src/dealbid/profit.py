"""Expected profit of a group-buying deal as a function of the bid.

A deal only earns money if it collects at least ``m`` clicks before it expires
("tips"). Winning an impression and getting a click on it is a single Bernoulli
trial with success probability ``mu * d(bid)``, so the number of future clicks
over the remaining ``u`` visits is binomial. The two binomial quantities the
profit needs are

* ``phi(r, u, p)``   = P(J >= r)
* ``theta(r, u, p)`` = E[J; J >= r]

with ``J ~ Bin(u, p)`` and ``r`` the clicks still missing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from . import _binom
from .winmodel import (FIRST_PRICE, ConstantWinModel, GaussianWinModel, UniformWinModel,
                       WinModel)

#: Auto mode switches to the normal approximation when u*p*(1-p) reaches this.
#: The textbook rule of thumb is 10, but continuity-corrected normal tails are
#: still off by up to ~0.02 there for small p; 50 keeps the error under 0.01.
AUTO_NORMAL_THRESHOLD = 50.0
RULE_OF_THUMB_THRESHOLD = 10.0


@dataclass(frozen=True)
class Deal:
    """Static contract: ``m`` clicks needed within ``e`` visits, paying ``rho`` per click."""

    m: int
    e: int
    rho: float
    mu: float

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("required clicks m must be nonnegative")
        if self.e < 1:
            raise ValueError("expiry e must be at least one visit")
        if self.rho < 0:
            raise ValueError("pay per click rho must be nonnegative")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("click-through rate mu must lie in [0, 1]")


@dataclass
class DealState:
    """Mutable campaign progress. The simulator is the only writer.

    The last four fields belong to the real-time bidder's recompute policy.
    """

    t: int = 0
    clicks: int = 0
    spend: float = 0.0
    cached_bid: Optional[float] = None
    opportunities_since_recompute: int = 0
    starts_done: int = 0
    clicks_at_recompute: int = 0

    def remaining_clicks(self, deal: Deal) -> int:
        return max(deal.m - self.clicks, 0)

    def remaining_visits(self, deal: Deal) -> int:
        return deal.e - self.t

    def tipped(self, deal: Deal) -> bool:
        return self.clicks >= deal.m

    @classmethod
    def at(cls, deal: Deal, *, clicks: int = 0, remaining_visits: Optional[int] = None,
           spend: float = 0.0) -> "DealState":
        """State with ``clicks`` received and ``remaining_visits`` left before expiry."""
        u = deal.e if remaining_visits is None else remaining_visits
        if not 0 <= u <= deal.e:
            raise ValueError("remaining visits must lie in [0, e]")
        return cls(t=deal.e - u, clicks=clicks, spend=spend)


def _mode_code(mode: str) -> int:
    try:
        return _binom.MODES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(_binom.MODES)}") from None


def phi(r: int, u: int, p: float, mode: str = "auto", *,
        threshold: float = AUTO_NORMAL_THRESHOLD) -> float:
    """Probability of at least ``r`` successes in ``u`` Bernoulli(``p``) trials.

    ``mode`` selects the evaluation: ``exact`` sums the upper tail term by term,
    ``tail`` computes one minus the lower sum (few terms when ``r << u``),
    ``normal`` uses a continuity-corrected normal tail and ``auto`` picks
    ``normal`` once ``u*p*(1-p) >= threshold`` and ``tail`` otherwise.
    ``r <= 0`` gives 1.
    """
    return _binom.phi_theta(int(r), int(u), float(p), _mode_code(mode), float(threshold), False)[0]


def theta(r: int, u: int, p: float, mode: str = "auto", *,
          threshold: float = AUTO_NORMAL_THRESHOLD, printed_normal: bool = False) -> float:
    """Expected number of successes counted only on outcomes with at least ``r``.

    In normal mode the truncated mean is ``sigma*pdf(z0) + u*p*Q(z0)``.
    ``printed_normal=True`` evaluates the variant without the ``Q(z0)`` factor
    on the mean term, which overstates the value whenever ``phi < 1``; it is
    kept only so the two can be compared.
    """
    return _binom.phi_theta(int(r), int(u), float(p), _mode_code(mode), float(threshold),
                            bool(printed_normal))[1]


def binom_pmf(j: int, u: int, p: float) -> float:
    return _binom.binom_pmf(int(j), int(u), float(p))


class ProfitObjective:
    """Expected profit as a function of the bid, minus the already-sunk spend.

    Past spend shifts the profit by a constant, so optimizers work on this
    function and add ``state.spend`` back when reporting. For the built-in win
    models under first-price payment ``params`` holds everything the compiled
    evaluator needs and the optimizer runs entirely in compiled code.
    """

    def __init__(self, deal: Deal, state: DealState, win: WinModel, pay=FIRST_PRICE,
                 mode: str = "auto", threshold: float = AUTO_NORMAL_THRESHOLD):
        self.r = state.remaining_clicks(deal)
        self.u = state.remaining_visits(deal)
        self.c = state.clicks
        self.rho, self.mu = float(deal.rho), float(deal.mu)
        self.code = _mode_code(mode)
        self.threshold = float(threshold)
        self.win, self.pay = win, pay
        self.params = _compiled_params(win, pay, self)

    def __call__(self, bid: float) -> float:
        if self.params is not None:
            return _binom.profit_value(float(bid), self.params)
        d = self.win.win_probability(bid)
        ph, th = _binom.phi_theta(self.r, self.u, self.mu * d, self.code, self.threshold, False)
        return self.c * self.rho * ph + self.rho * th - self.u * d * self.pay(bid)


def _compiled_params(win, pay, obj):
    if pay != FIRST_PRICE:
        return None
    if isinstance(win, UniformWinModel):
        model = (_binom.UNIFORM, float(win.lo), float(win.hi), win.n_bidders - 1)
    elif isinstance(win, GaussianWinModel):
        model = (_binom.GAUSSIAN, float(win.mean), float(win.sigma), win.n_bidders - 1)
    elif isinstance(win, ConstantWinModel):
        model = (_binom.CONSTANT, float(win.p), 0.0, 0)
    else:
        return None
    return model + (obj.r, obj.u, obj.c, obj.rho, obj.mu, obj.code, obj.threshold)


def bid_objective(deal: Deal, state: DealState, win: WinModel, pay=FIRST_PRICE,
                  mode: str = "auto", *, threshold: float = AUTO_NORMAL_THRESHOLD
                  ) -> ProfitObjective:
    return ProfitObjective(deal, state, win, pay, mode, threshold)


def expected_profit(deal: Deal, state: DealState, bid: float, win: WinModel, pay=FIRST_PRICE,
                    mode: str = "auto", **kw) -> float:
    """Expected final profit of the deal if ``bid`` is placed on every remaining visit.

    ``c*rho*phi + rho*theta - spend - u*d(bid)*h(bid)``: revenue from clicks
    already banked and from future clicks, each counted only on outcomes where
    the deal tips, minus the past and the expected future payments.
    """
    return bid_objective(deal, state, win, pay, mode, **kw)(bid) - state.spend


def non_guaranteed_profit(deal: Deal, state: DealState, bid: float, win: WinModel,
                          pay=FIRST_PRICE) -> float:
    """Expected profit once no guarantee binds: ``c*rho + u*d(b)*(rho*mu - h(b)) - spend``."""
    d = win.win_probability(bid)
    u = state.remaining_visits(deal)
    return (state.clicks * deal.rho + u * d * (deal.rho * deal.mu - pay(bid))
            - state.spend)


def marginal_value(deal: Deal, state: DealState, bid: float, win: WinModel,
                   mode: str = "auto", **kw) -> float:
    """Expected value to the deal of winning the current impression, plus the bid.

    Equals ``mu*rho*[(c + r - 1)*P(J' = r - 1) + P(J' >= r - 1)]`` with
    ``J' ~ Bin(u - 1, mu*d(bid))``. For a tipped deal (``r = 0``) this is just
    ``mu*rho``. Subtracting the bid gives the expected profit of showing the
    deal now, which is what greedy deal selection ranks on.
    """
    r = state.remaining_clicks(deal)
    u = state.remaining_visits(deal)
    if u < 1:
        raise ValueError("deal has expired")
    p = deal.mu * win.win_probability(bid)
    pmf = _binom.binom_pmf(r - 1, u - 1, p)
    tail = phi(r - 1, u - 1, p, mode, **kw)
    return deal.mu * deal.rho * ((state.clicks + r - 1) * pmf + tail)


def admissibility_profit(deal: Deal, bid: float, expected_visits: Optional[int] = None,
                         win: Optional[WinModel] = None, pay=FIRST_PRICE, mode: str = "auto",
                         **kw) -> float:
    """Expected profit of a deal that has not started yet, bidding ``bid`` throughout."""
    if win is None:
        raise TypeError("admissibility_profit needs a win model")
    e = deal.e if expected_visits is None else int(expected_visits)
    fresh = Deal(m=deal.m, e=e, rho=deal.rho, mu=deal.mu)
    return expected_profit(fresh, DealState(), bid, win, pay, mode, **kw)


def single_impression_profit(value: float, bid: float, win: WinModel, pay=FIRST_PRICE) -> float:
    """``d(b) * (value - h(b))``: the classic expected profit of one auction."""
    return win.win_probability(bid) * (value - pay(bid))


@lru_cache(maxsize=4096)
def _static_bid_cached(value: float, win, pay) -> float:
    from .optimizer import brent_maximize

    lo, hi = win.bounds()
    if value <= lo:
        return lo
    hi = max(hi, value)

    def f(b):
        return single_impression_profit(value, b, win, pay)

    # d(b)*(value - b) is log-concave for the shipped models, so one
    # bracket-wide search finds the maximum
    tol = (hi - lo) * 1e-9
    bid, best = brent_maximize(f, (lo, hi), lo + 0.5 * (hi - lo), abs_tol=tol, max_iters=500)
    for edge in (lo, min(hi, value)):
        fe = f(edge)
        if fe > best:
            bid, best = edge, fe
    return bid


def static_optimal_bid(deal: Deal, win: WinModel, pay=FIRST_PRICE) -> float:
    """Best constant bid when no click guarantee binds.

    Maximizes ``d(b)*(rho*mu - b)`` over ``[support_min, max(support_max, rho*mu)]``.
    For ``uniform(0, hi, n)`` competitors the answer is
    ``min((n-1)/n * rho*mu, hi)``.
    """
    return _static_bid_cached(float(deal.rho * deal.mu), win, pay)


def uniform_static_bid_closed_form(value: float, hi: float, n_bidders: int) -> float:
    """Closed-form static optimum for competitors uniform on ``[0, hi]``."""
    return min(max((n_bidders - 1) * value / n_bidders, 0.0), hi)
