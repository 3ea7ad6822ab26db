"""Real-time bidding for group-buying deals that must reach a minimum click count."""

from .bidders import (STRATEGIES, AdaptiveBidder, Bidder, RandomBidder, RealTimeBidder,
                      StaticOptimalBidder)
from .optimizer import (BidBounds, DealExpired, NonFiniteObjective, OptimizerConfig,
                        brent_maximize, multi_start_maximize, next_bid, optimal_bid)
from .profit import (Deal, DealState, admissibility_profit, bid_objective, expected_profit,
                     marginal_value, non_guaranteed_profit, phi, static_optimal_bid, theta)
from .simulator import (ImpressionRecord, ReplayReport, SyntheticLogSpec, admissibility_experiment,
                        bench_optimizer, generate_synthetic_log, replay_ad, selection_experiment,
                        sweep_required_clicks, synthetic_click_log)
from .winmodel import (FIRST_PRICE, CompetitorField, ConstantWinModel, FirstPricePayment,
                       GaussianWinModel, UniformWinModel, win_probability)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveBidder", "BidBounds", "Bidder", "CompetitorField", "ConstantWinModel", "Deal",
    "DealExpired", "DealState", "FIRST_PRICE", "FirstPricePayment", "GaussianWinModel",
    "ImpressionRecord", "NonFiniteObjective", "OptimizerConfig", "RandomBidder",
    "RealTimeBidder", "ReplayReport", "STRATEGIES", "StaticOptimalBidder", "SyntheticLogSpec",
    "UniformWinModel", "admissibility_experiment", "admissibility_profit", "bench_optimizer",
    "bid_objective", "brent_maximize", "expected_profit", "generate_synthetic_log",
    "marginal_value", "multi_start_maximize", "next_bid", "non_guaranteed_profit",
    "optimal_bid", "phi", "replay_ad", "selection_experiment", "static_optimal_bid",
    "sweep_required_clicks", "synthetic_click_log", "theta", "win_probability",
]
