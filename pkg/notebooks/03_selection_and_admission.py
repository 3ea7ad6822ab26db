"""Choosing among deals competing for the same visits, and admitting deals.

Selection: a group of deals shares one stream of visits, and each visit goes
to the deal with the best score. Admission: a deal is accepted only if its
bid-optimized expected profit at the start is positive.
"""

from dealbid import (StaticOptimalBidder, RealTimeBidder, SyntheticLogSpec, UniformWinModel,
                     admissibility_experiment, selection_experiment, synthetic_click_log)

log = synthetic_click_log(SyntheticLogSpec(n_ads=40, impressions_per_ad=4000,
                                           ctr_range=(0.005, 0.02), seed=5))
win = UniformWinModel(0.0, 0.04, 4)

for row in selection_experiment(log, [0, 50], win, seed=2, total_visits=8000, n_groups=5):
    print(f"m_max={row.m_max:>3} {row.selector:>6}: mean group profit {row.mean_group_profit:.1f}")

rows = admissibility_experiment(log, [25, 75], [RealTimeBidder(), StaticOptimalBidder()], win,
                                seed=2, rho=10.0)
for row in rows:
    print(f"m={row.m:>3} {row.strategy:>6}: admitted {row.n_admitted}/{row.n_ads},"
          f" mean {row.mean_profit_admitted:.1f} vs {row.mean_profit_all:.1f} unfiltered")
