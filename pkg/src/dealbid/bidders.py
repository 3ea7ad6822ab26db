"""Bidding strategies: the real-time optimizer and the three baselines.

Every strategy answers ``bid(deal, state, win, pay)`` for one impression
opportunity. Once a deal has tipped no guarantee binds any more, so all of them
fall back to the static optimal bid from then on.

For replay speed a strategy can also hand out a *block* of bids covering the
next several opportunities, valid as long as no click is won in between; the
simulator then resolves the whole block with array operations. A block must
contain exactly the bids that repeated ``bid`` calls would have produced.
"""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from .optimizer import OptimizerConfig, next_bid
from .profit import Deal, DealState, static_optimal_bid
from .winmodel import FIRST_PRICE, WinModel


class Bidder:
    name = "bidder"

    def reset(self, deal: Deal, rng: Optional[np.random.Generator] = None) -> None:
        """Called once before a replay of ``deal`` starts."""

    def bid(self, deal: Deal, state: DealState, win: WinModel, pay=FIRST_PRICE) -> float:
        _check_live(deal, state)
        if state.tipped(deal):
            return static_optimal_bid(deal, win, pay)
        return self._bid(deal, state, win, pay)

    def _bid(self, deal, state, win, pay) -> float:
        raise NotImplementedError

    def bid_block(self, deal: Deal, state: DealState, win: WinModel, pay=FIRST_PRICE,
                  max_len: Optional[int] = None) -> np.ndarray:
        """Bids for the next opportunities, assuming none of them yields a click.

        Calling ``advance(state, n)`` afterwards tells the strategy that the
        first ``n`` bids of the block were used.
        """
        limit = state.remaining_visits(deal) if max_len is None else max_len
        if state.tipped(deal):
            _check_live(deal, state)
            return np.full(limit, static_optimal_bid(deal, win, pay))
        return self._block(deal, state, win, pay, limit)

    def _block(self, deal, state, win, pay, limit) -> np.ndarray:
        return np.array([self.bid(deal, state, win, pay)])

    def advance(self, state: DealState, n_used: int) -> None:
        pass

    def __repr__(self):
        return f"{type(self).__name__}()"


def _check_live(deal, state):
    if state.remaining_visits(deal) < 1:
        raise ValueError(f"deal expired (t={state.t}, e={deal.e}); no bid possible")


class StaticOptimalBidder(Bidder):
    """Maximizes the single-impression profit ``d(b)*(rho*mu - b)``; ignores the guarantee."""

    name = "static"

    def _bid(self, deal, state, win, pay):
        return static_optimal_bid(deal, win, pay)

    def _block(self, deal, state, win, pay, limit):
        return np.full(limit, static_optimal_bid(deal, win, pay))


class AdaptiveBidder(Bidder):
    """Static optimum nudged by the gap between required and observed click rates.

    Bids ``static + r/u - mu``, floored at zero.
    """

    name = "adaptive"

    def _bid(self, deal, state, win, pay):
        r = state.remaining_clicks(deal)
        u = state.remaining_visits(deal)
        return max(0.0, static_optimal_bid(deal, win, pay) + r / u - deal.mu)

    def _block(self, deal, state, win, pay, limit):
        r = state.remaining_clicks(deal)
        u = state.remaining_visits(deal) - np.arange(limit)
        return np.maximum(0.0, static_optimal_bid(deal, win, pay) + r / u - deal.mu)


class RandomBidder(Bidder):
    """Uniform random bids on ``[lo, hi]``, drawn up front for the whole replay."""

    name = "random"

    def __init__(self, lo: float, hi: float, seed: int = 0):
        if not 0 <= lo <= hi:
            raise ValueError("random bidder needs 0 <= lo <= hi")
        self.lo, self.hi, self.seed = lo, hi, seed
        self._bids = None

    def reset(self, deal, rng=None):
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        self._bids = rng.uniform(self.lo, self.hi, deal.e)

    def _draws(self, deal, state, n):
        if self._bids is None or len(self._bids) < deal.e:
            self.reset(deal)
        return self._bids[state.t:state.t + n]

    def _bid(self, deal, state, win, pay):
        return float(self._draws(deal, state, 1)[0])

    def _block(self, deal, state, win, pay, limit):
        return self._draws(deal, state, limit).copy()

    def __repr__(self):
        return f"RandomBidder(lo={self.lo}, hi={self.hi})"


class RealTimeBidder(Bidder):
    """Re-optimizes the expected deal profit online (see ``optimizer.next_bid``).

    Keeps wall-clock timings of every call that actually ran an optimization.
    """

    name = "rt"

    def __init__(self, cfg: Optional[OptimizerConfig] = None):
        self.cfg = cfg or OptimizerConfig()
        self.timings: list[float] = []

    def reset(self, deal, rng=None):
        self.timings = []

    def _bid(self, deal, state, win, pay):
        t0 = time.perf_counter()
        bid = next_bid(deal, state, win, pay, self.cfg)
        if state.opportunities_since_recompute == 0:
            # cached-bid calls always leave the counter >= 1
            self.timings.append(time.perf_counter() - t0)
        return bid

    def _block(self, deal, state, win, pay, limit):
        bid = self._bid(deal, state, win, pay)
        if state.starts_done < self.cfg.multi_start_impressions:
            n = 1
        else:
            n = self.cfg.recompute_interval - state.opportunities_since_recompute
        return np.full(max(1, min(n, limit)), bid)

    def advance(self, state, n_used):
        if n_used > 1:
            state.opportunities_since_recompute += n_used - 1

    def __repr__(self):
        return f"RealTimeBidder({self.cfg})"


STRATEGIES = {
    "rt": RealTimeBidder,
    "static": StaticOptimalBidder,
    "adaptive": AdaptiveBidder,
    "random": RandomBidder,
}
