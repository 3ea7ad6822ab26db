"""The expected deal profit as a function of the bid.

A deal 5 clicks short of its guarantee, with 3000 visits left and one
competitor bidding uniformly on [0, 0.1]. The curve has two peaks: bidding
nothing (give up on tipping) and bidding enough to reach the guarantee.
"""

import numpy as np

from dealbid import Deal, DealState, OptimizerConfig, UniformWinModel, expected_profit, optimal_bid

deal = Deal(m=25, e=3000, rho=15.0, mu=0.002)
state = DealState.at(deal, clicks=20, remaining_visits=3000)
win = UniformWinModel(0.0, 0.1, 2)

bids = np.linspace(0.0, 0.1, 1001)
profit = np.array([expected_profit(deal, state, b, win, mode="exact") for b in bids])

# interior and endpoint peaks
inner = (profit[1:-1] > profit[:-2]) & (profit[1:-1] > profit[2:])
peaks = list(np.flatnonzero(inner) + 1)
if profit[0] > profit[1]:
    peaks.insert(0, 0)
if profit[-1] > profit[-2]:
    peaks.append(len(bids) - 1)
for i in peaks:
    print(f"local max at b={bids[i]:.4f}: expected profit {profit[i]:.4f}")

# tail sums match exact; the normal form is poor here since u*p*(1-p) < 6
for mode in ("tail", "normal"):
    alt = np.array([expected_profit(deal, state, b, win, mode=mode) for b in bids])
    print(f"{mode:>6}: max |diff| vs exact = {np.abs(alt - profit).max():.2e}")

bid, value = optimal_bid(deal, state, win, cfg=OptimizerConfig(mode="exact"))
print(f"multi-start optimum: b={bid:.4f}, profit {value:.4f} (grid max {profit.max():.4f})")
