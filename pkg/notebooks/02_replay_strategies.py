"""Replaying a synthetic click log under each bidding strategy.

Each ad becomes a deal that needs m clicks before the log runs out. All
strategies see the same competitor bids, so profits are paired per ad.
"""

from dealbid import (OptimizerConfig, RandomBidder, RealTimeBidder, StaticOptimalBidder,
                     SyntheticLogSpec, UniformWinModel, sweep_required_clicks, synthetic_click_log)

log = synthetic_click_log(SyntheticLogSpec(n_ads=30, impressions_per_ad=5000,
                                           ctr_range=(0.005, 0.02), seed=3))
win = UniformWinModel(0.0, 0.04, 4)  # three competitors
strategies = [RealTimeBidder(OptimizerConfig()), StaticOptimalBidder(),
              RandomBidder(0.0, 0.04, seed=1)]

result = sweep_required_clicks(log, [0, 25, 50], strategies, win, seed=11, rho=10.0)
print(f"{'m':>4} {'strategy':>8} {'mean profit':>12} {'tipped':>7}")
for row in result.rows:
    print(f"{row.m:>4} {row.strategy:>8} {row.mean_profit:>12.2f} {row.n_tipped:>4}/{row.n_ads}")

# per-ad view for the hardest setting
rt = {r.ad_id: r for r in result.reports[50, "rt"]}
st = {r.ad_id: r for r in result.reports[50, "static"]}
gains = sorted(((rt[a].realized_profit - st[a].realized_profit, a) for a in rt), reverse=True)
for gain, ad in gains[:5]:
    print(f"{ad}: mu={rt[ad].mu:.4f} rt bid {rt[ad].mean_bid:.4f} vs static {st[ad].mean_bid:.4f},"
          f" profit gain {gain:.2f}")
