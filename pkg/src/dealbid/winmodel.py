"""Win-probability and payment models for sealed-bid, highest-bid-wins auctions.

A win model describes the bids of the *other* bidders in the auction. Every
competitor draws independently from the same single-bidder distribution, so the
probability that our bid ``b`` beats all of them is ``F(b) ** (n_bidders - 1)``,
where ``n_bidders`` counts everyone including ourselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(z: float) -> float:
    """Standard normal CDF, accurate to well below 1e-7 in absolute terms."""
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_sf(z: float) -> float:
    """Standard normal upper tail ``1 - normal_cdf(z)`` without cancellation."""
    return 0.5 * math.erfc(z / _SQRT2)


def normal_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


@dataclass(frozen=True)
class UniformWinModel:
    """Competitor bids i.i.d. uniform on ``[lo, hi]``."""

    lo: float
    hi: float
    n_bidders: int

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"uniform win model needs hi > lo, got [{self.lo}, {self.hi}]")
        if self.lo < 0:
            raise ValueError("bids cannot be negative")
        _check_bidders(self.n_bidders)

    def win_probability(self, bid: float) -> float:
        if self.n_bidders == 1:
            return 1.0
        x = (bid - self.lo) / (self.hi - self.lo)
        if x <= 0.0:
            return 0.0
        if x >= 1.0:
            return 1.0
        return x ** (self.n_bidders - 1)

    def bounds(self) -> tuple[float, float]:
        return self.lo, self.hi

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class GaussianWinModel:
    """Competitor bids i.i.d. normal; sampled bids are truncated at zero.

    ``win_probability`` uses the untruncated normal CDF. With the parameter
    ranges used for experiments the negative mass is a few percent at most,
    and the mismatch is deliberate: it is one of the ways the bidder's
    assumptions can be wrong about the real competitors.
    """

    mean: float
    sigma: float
    n_bidders: int

    # bid search range is mean +/- this many sigmas, floored at zero
    support_sigmas = 8.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"gaussian win model needs sigma > 0, got {self.sigma}")
        _check_bidders(self.n_bidders)

    def win_probability(self, bid: float) -> float:
        if self.n_bidders == 1:
            return 1.0
        return normal_cdf((bid - self.mean) / self.sigma) ** (self.n_bidders - 1)

    def bounds(self) -> tuple[float, float]:
        lo = max(0.0, self.mean - self.support_sigmas * self.sigma)
        return lo, self.mean + self.support_sigmas * self.sigma

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.maximum(rng.normal(self.mean, self.sigma, size), 0.0)


@dataclass(frozen=True)
class ConstantWinModel:
    """Bid-independent win probability; ``p=1`` models selection without bidding."""

    p: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"constant win probability must lie in [0, 1], got {self.p}")

    @property
    def n_bidders(self) -> int:
        return 1

    def win_probability(self, bid: float) -> float:
        return self.p

    def bounds(self) -> tuple[float, float]:
        # bids buy nothing here, so the search range only needs to contain 0
        return 0.0, 1.0

    def sample(self, rng, size):
        raise TypeError("a constant win model has no competitor bid distribution to sample")


WinModel = Union[UniformWinModel, GaussianWinModel, ConstantWinModel]


def _check_bidders(n):
    if int(n) != n or n < 1:
        raise ValueError(f"n_bidders must be a positive integer, got {n}")


def win_probability(model: WinModel, bid: float) -> float:
    """Probability that ``bid`` is the highest bid in the auction."""
    return model.win_probability(bid)


def sample_competitor_bids(model: WinModel, rng: np.random.Generator) -> np.ndarray:
    """One auction's worth of competitor bids (``n_bidders - 1`` values)."""
    return model.sample(rng, model.n_bidders - 1)


@dataclass(frozen=True)
class CompetitorField:
    """The bidders actually present in a simulated auction.

    Each entry is a model together with how many competitors draw from it, which
    lets the simulator field competitors that differ from what the bidder
    assumes (e.g. two gaussian and one uniform competitor).
    """

    groups: tuple[tuple[WinModel, int], ...]

    @classmethod
    def from_model(cls, model: WinModel) -> "CompetitorField":
        if isinstance(model, ConstantWinModel):
            if model.p != 1.0:
                raise TypeError("a constant win model below 1 has no competitor bids to simulate")
            return cls(())  # nobody else in the auction
        return cls(((model, model.n_bidders - 1),))

    @property
    def n_competitors(self) -> int:
        return sum(k for _, k in self.groups)

    def sample_max(self, rng: np.random.Generator, n_auctions: int) -> np.ndarray:
        """Highest competitor bid in each of ``n_auctions`` auctions."""
        best = np.full(n_auctions, -np.inf)
        for model, k in self.groups:
            if k > 0:
                best = np.maximum(best, model.sample(rng, (n_auctions, k)).max(axis=1))
        return best


def as_field(competitors: Union[WinModel, CompetitorField, Sequence]) -> CompetitorField:
    if isinstance(competitors, CompetitorField):
        return competitors
    if isinstance(competitors, (UniformWinModel, GaussianWinModel, ConstantWinModel)):
        return CompetitorField.from_model(competitors)
    return CompetitorField(tuple((m, int(k)) for m, k in competitors))


class FirstPricePayment:
    """Winner pays its own bid."""

    def __call__(self, bid: float) -> float:
        return bid

    def __eq__(self, other):
        return isinstance(other, FirstPricePayment)

    def __hash__(self):
        return hash(FirstPricePayment)

    def __repr__(self):
        return "FirstPricePayment()"


FIRST_PRICE = FirstPricePayment()


def payment(model, bid: float) -> float:
    """Amount charged to the winner of an auction at ``bid``."""
    return model(bid)
