import math

import numpy as np
import pytest

from _oracles import strict_local_maxima
from dealbid import optimizer
from dealbid import (BidBounds, Deal, DealExpired, DealState, GaussianWinModel,
                     NonFiniteObjective, OptimizerConfig, UniformWinModel, bid_objective,
                     brent_maximize, multi_start_maximize, next_bid, optimal_bid)


def test_quadratic_maximum():
    cfg = OptimizerConfig(abs_tol=1e-6)
    for start in (0.0, 1.3, 4.9, 5.0):
        x, fx = brent_maximize(lambda x: -(x - 2) ** 2, (0, 5), start, cfg)
        assert abs(x - 2) <= 1e-6 and fx <= 0


def test_non_smooth_maximum():
    x, _ = brent_maximize(lambda x: -abs(x - 0.3), (0, 1), 0.9, OptimizerConfig(abs_tol=1e-6))
    assert abs(x - 0.3) <= 1e-6


def test_never_leaves_bounds_and_respects_iteration_cap():
    seen = []

    def f(x):
        seen.append(x)
        return math.sin(40 * x) + x

    brent_maximize(f, (0.2, 0.7), 0.2, OptimizerConfig(max_iters=7))
    assert min(seen) >= 0.2 and max(seen) <= 0.7
    assert len(seen) <= 7 + 1


def test_non_finite_objective_reports_bid():
    with pytest.raises(NonFiniteObjective) as info:
        brent_maximize(lambda x: math.nan if x > 0.5 else x, (0, 1), 0.4)
    assert info.value.bid > 0.5


def test_start_outside_bounds_rejected():
    with pytest.raises(ValueError):
        brent_maximize(lambda x: x, (0, 1), 1.5)
    with pytest.raises(ValueError):
        BidBounds(1.0, 1.0)


def test_config_validation():
    for bad in (dict(abs_tol=0.0), dict(multi_start_impressions=0), dict(recompute_interval=0),
                dict(max_iters=0), dict(starts_per_impression=0)):
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)


def test_compiled_and_python_paths_agree(fig1):
    deal, state, win = fig1
    f = bid_objective(deal, state, win, mode="exact")
    assert f.params is not None
    for start in (0.01, 0.05, 0.09):
        fast = brent_maximize(f, (0, 0.1), start)
        slow = brent_maximize(lambda b: f(b), (0, 0.1), start)
        assert fast == slow


def test_inferior_start_gets_stuck_and_multistart_escapes(fig1):
    deal, state, win = fig1
    f = bid_objective(deal, state, win, mode="exact")
    grid = np.linspace(0, 0.1, 1000)
    values = np.array([f(b) for b in grid])
    peaks = strict_local_maxima(values)
    inferior = grid[peaks[0]]
    x, fx = brent_maximize(f, (0, 0.1), 0.005)
    cfg = OptimizerConfig()
    assert abs(x - inferior) <= cfg.tolerance(BidBounds(0, 0.1))
    assert fx < values.max() - 1

    starts = np.random.default_rng(0).uniform(0, 0.1, 8)
    _, best = multi_start_maximize(f, (0, 0.1), starts)
    assert best >= values.max() - 1e-6
    _, seeded = multi_start_maximize(f, (0, 0.1), [grid[values.argmax()]])
    assert seeded >= values.max() - 1e-6


def test_multistart_dominates_each_start():
    f = lambda x: math.sin(25 * x) * x  # noqa: E731
    starts = [0.05, 0.3, 0.55, 0.8]
    _, best = multi_start_maximize(f, (0, 1), starts)
    for s in starts:
        assert best >= brent_maximize(f, (0, 1), s)[1]
    g = lambda x: -(x - 0.4) ** 2  # noqa: E731
    assert multi_start_maximize(g, (0, 1), [0.9])[0] == pytest.approx(brent_maximize(g, (0, 1), 0.9)[0])


def test_multistart_skips_failing_starts_and_fails_when_all_fail():
    f = lambda x: math.inf if x < 0.1 else -(x - 0.5) ** 2  # noqa: E731
    x, _ = multi_start_maximize(f, (0, 1), [0.05, 0.6])
    assert abs(x - 0.5) < 1e-4
    with pytest.raises(NonFiniteObjective):
        multi_start_maximize(lambda x: math.nan, (0, 1), [0.2, 0.7])
    with pytest.raises(ValueError):
        multi_start_maximize(f, (0, 1), [])


class Spy:
    """Counts searches and objective evaluations made by next_bid."""

    def __init__(self, monkeypatch):
        self.evaluations = 0
        self.searches = []
        real_objective = optimizer.bid_objective
        real_multi = optimizer.multi_start_maximize
        real_brent = optimizer.brent_maximize

        def objective(*a, **k):
            f = real_objective(*a, **k)

            def counted(b):
                self.evaluations += 1
                return f(b)

            return counted

        def multi(*a, **k):
            self.searches.append("multi")
            return real_multi(*a, **k)

        def brent(*a, **k):
            self.searches.append("warm")
            return real_brent(*a, **k)

        monkeypatch.setattr(optimizer, "bid_objective", objective)
        monkeypatch.setattr(optimizer, "multi_start_maximize", multi)
        monkeypatch.setattr(optimizer, "brent_maximize", brent)


def _trace(monkeypatch, n_calls, click_after=()):
    spy = Spy(monkeypatch)
    deal = Deal(m=40, e=5000, rho=10.0, mu=0.01)
    state = DealState()
    win = UniformWinModel(0, 0.04, 4)
    log = []
    for call in range(1, n_calls + 1):
        before_evals, before = spy.evaluations, len(spy.searches)
        bid = next_bid(deal, state, win)
        kind = spy.searches[before] if len(spy.searches) > before else None
        log.append((call, kind, spy.evaluations - before_evals, bid))
        state.t += 1
        if call in click_after:
            state.clicks += 1
    return log


def test_policy_trace_without_clicks(monkeypatch):
    log = _trace(monkeypatch, 80)
    assert all(kind == "multi" for _, kind, _, _ in log[:20])
    reopt = [call for call, kind, _, _ in log[20:] if kind is not None]
    assert reopt == [52]
    for call, kind, evals, bid in log[20:]:
        if kind is None:
            assert evals == 0
            assert bid == log[call - 2][3]


def test_click_forces_reoptimization(monkeypatch):
    log = _trace(monkeypatch, 80, click_after={40})
    reopt = [call for call, kind, _, _ in log[20:] if kind is not None]
    assert reopt == [41, 73]
    assert log[40][1] == "warm"


def test_next_bid_deterministic_and_in_bounds():
    deal = Deal(m=80, e=9000, rho=10.0, mu=0.012)
    win = GaussianWinModel(0.02, 0.01, 3)
    lo, hi = win.bounds()
    runs = []
    for _ in range(2):
        state = DealState()
        bids = []
        for t in range(200):
            bids.append(next_bid(deal, state, win))
            state.t += 1
            if t % 37 == 5:
                state.clicks += 1
        runs.append(bids)
    assert runs[0] == runs[1]
    assert all(lo <= b <= hi for b in runs[0])


def test_expired_deal_rejected():
    deal = Deal(m=1, e=3, rho=1.0, mu=0.1)
    with pytest.raises(DealExpired):
        next_bid(deal, DealState(t=3), UniformWinModel(0, 0.04, 4))


def test_optimal_bid_leaves_state_untouched():
    deal = Deal(m=30, e=4000, rho=10.0, mu=0.01)
    state = DealState(t=10, clicks=2, spend=1.5)
    before = DealState(**vars(state))
    bid, value = optimal_bid(deal, state, UniformWinModel(0, 0.04, 4))
    assert state == before
    assert 0 <= bid <= 0.04 and np.isfinite(value)
