"""Click-log replay against simulated first-price auctions, and the experiments built on it.

A replay walks through one ad's impressions in order. At each impression the
strategy bids, the competitors' bids are drawn, the highest bid wins, and a
won impression yields a click exactly when the log recorded one. Profit is
settled at the end: click revenue only if the deal tipped, minus everything
paid for impressions.

Competitor bids are a deterministic function of ``(seed, ad_id)``, so every
strategy replaying the same ad faces the very same auctions.
"""

from __future__ import annotations

import copy
import math
import time
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .bidders import STRATEGIES, Bidder, RealTimeBidder
from .optimizer import OptimizerConfig, next_bid, optimal_bid
from .profit import Deal, DealState, marginal_value
from .winmodel import FIRST_PRICE, CompetitorField, WinModel, as_field

ClickLog = Mapping[str, np.ndarray]


@dataclass(frozen=True)
class ImpressionRecord:
    ad_id: str
    seq: int
    clicked: bool


@dataclass
class ReplayReport:
    """Outcome of one strategy replaying one ad.

    ``realized_profit`` settles the whole replay: ``rho*clicks_won - spend`` if
    the deal tipped, ``-spend`` otherwise. ``pre_tip_profit`` stops the books at
    the impression that tipped the deal (revenue ``rho*m``), which is the period
    where strategies actually differ; ``post_tip_profit`` is the rest.
    """

    ad_id: str
    strategy: str
    m: int
    e: int
    mu: float
    rho: float
    wins: int = 0
    clicks_won: int = 0
    spend: float = 0.0
    tipped: bool = False
    tip_time: int = -1
    realized_profit: float = 0.0
    pre_tip_profit: float = 0.0
    post_tip_profit: float = 0.0
    mean_bid: float = 0.0
    optimizations: int = 0
    opt_time_mean: float = 0.0
    opt_time_p99: float = 0.0

    TIMING_FIELDS = ("optimizations", "opt_time_mean", "opt_time_p99")

    def row(self, timing: bool = False) -> dict:
        out = asdict(self)
        if not timing:
            for k in self.TIMING_FIELDS:
                out.pop(k)
        return out


def click_flags(records) -> np.ndarray:
    """Boolean click array from ImpressionRecords (in seq order) or anything array-like."""
    if isinstance(records, np.ndarray):
        return records.astype(bool, copy=False)
    records = list(records)
    if records and isinstance(records[0], ImpressionRecord):
        records = sorted(records, key=lambda rec: rec.seq)
        return np.fromiter((rec.clicked for rec in records), dtype=bool, count=len(records))
    return np.asarray(records, dtype=bool)


def estimate_ctr(clicks: np.ndarray) -> float:
    return float(np.count_nonzero(clicks)) / len(clicks) if len(clicks) else 0.0


def deal_for_ad(clicks, m: int, rho: float, mu: Optional[float] = None,
                e: Optional[int] = None) -> Deal:
    """Deal replayed on one ad: expiry defaults to the log length, CTR to clicks/impressions."""
    clicks = click_flags(clicks)
    return Deal(m=int(m), e=int(len(clicks) if e is None else min(e, len(clicks))), rho=float(rho),
                mu=estimate_ctr(clicks) if mu is None else float(mu))


def _ad_key(ad_id) -> int:
    return zlib.crc32(str(ad_id).encode())


def auction_stream(field_: CompetitorField, seed: int, key, n: int):
    """Highest competitor bid and tie-break coin for ``n`` consecutive auctions."""
    rng = np.random.default_rng([int(seed), _ad_key(key)])
    best = field_.sample_max(rng, n)
    coin = rng.random(n) < 0.5
    return best, coin


def _payments(pay, bids: np.ndarray) -> np.ndarray:
    if pay == FIRST_PRICE:
        return bids
    return np.fromiter((pay(b) for b in bids), dtype=float, count=len(bids))


def make_strategy(spec, cfg: Optional[OptimizerConfig] = None, win: Optional[WinModel] = None,
                  seed: int = 0) -> Bidder:
    """Strategy from a name (``rt``, ``static``, ``adaptive``, ``random``) or pass-through."""
    if isinstance(spec, Bidder):
        return spec
    if spec == "rt":
        return RealTimeBidder(cfg)
    if spec == "random":
        lo, hi = win.bounds() if win is not None else (0.0, 1.0)
        return STRATEGIES["random"](lo, hi, seed)
    try:
        return STRATEGIES[spec]()
    except KeyError:
        raise ValueError(f"unknown strategy {spec!r}; choose from {sorted(STRATEGIES)}") from None


def replay_ad(records, deal: Deal, strategy: Bidder, win: WinModel, pay=FIRST_PRICE, seed: int = 0,
              *, ad_id: str = "ad", competitors=None, per_impression: bool = False) -> ReplayReport:
    """Replay one ad's impressions with ``strategy`` bidding for ``deal``.

    ``win`` is what the strategy believes about competitors; ``competitors``
    (a model, a ``CompetitorField`` or ``[(model, count), ...]``) is who
    actually shows up, defaulting to ``win``. ``per_impression=True`` asks
    the strategy for one bid at a time instead of in blocks; results are the
    same either way.
    """
    clicks = click_flags(records)
    if len(clicks) == 0:
        raise ValueError(f"no impressions to replay for {ad_id}")
    if deal.e > len(clicks):
        raise ValueError(f"deal expiry {deal.e} exceeds the {len(clicks)} logged impressions of {ad_id}")
    if deal.mu == 0 and deal.m > 0:
        warnings.warn(f"{ad_id}: CTR estimate is 0 with m={deal.m}; the deal cannot tip", stacklevel=2)

    e = deal.e
    clicks = clicks[:e]
    field_ = as_field(competitors if competitors is not None else win)
    best, coin = auction_stream(field_, seed, ad_id, e)
    strategy.reset(deal, np.random.default_rng([int(seed), _ad_key(ad_id), 1]))

    rep = ReplayReport(ad_id=str(ad_id), strategy=getattr(strategy, "name", type(strategy).__name__),
                       m=deal.m, e=e, mu=deal.mu, rho=deal.rho)
    state = DealState()
    spend_at_tip = 0.0
    if deal.m == 0:
        rep.tipped, rep.tip_time = True, 0
    bid_total = 0.0
    while state.t < e:
        t = state.t
        if per_impression:
            bids = np.array([strategy.bid(deal, state, win, pay)])
        else:
            bids = strategy.bid_block(deal, state, win, pay)
        k = min(len(bids), e - t)
        bids = bids[:k]
        comp = best[t:t + k]
        won = (bids > comp) | ((bids == comp) & coin[t:t + k])
        hits = np.flatnonzero(won & clicks[t:t + k])
        n = int(hits[0]) + 1 if hits.size else k
        won = won[:n]
        state.spend += float(_payments(pay, bids[:n])[won].sum())
        state.t += n
        rep.wins += int(np.count_nonzero(won))
        bid_total += float(bids[:n].sum())
        strategy.advance(state, n)
        if hits.size:
            state.clicks += 1
            if state.clicks == deal.m:
                rep.tipped, rep.tip_time = True, state.t
                spend_at_tip = state.spend

    rep.clicks_won = state.clicks
    rep.spend = state.spend
    rep.mean_bid = bid_total / e
    if rep.tipped:
        rep.realized_profit = deal.rho * state.clicks - state.spend
        rep.pre_tip_profit = deal.rho * deal.m - spend_at_tip
        rep.post_tip_profit = rep.realized_profit - rep.pre_tip_profit
    else:
        rep.realized_profit = rep.pre_tip_profit = 0.0 - state.spend
    timings = getattr(strategy, "timings", None)
    if timings:
        rep.optimizations = len(timings)
        rep.opt_time_mean = float(np.mean(timings))
        rep.opt_time_p99 = float(np.percentile(timings, 99))
    return rep


def _replay_many(jobs, threads: int):
    def run(job):
        return replay_ad(*job[0], **job[1])

    if threads <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, jobs))


@dataclass
class SweepRow:
    m: int
    strategy: str
    n_ads: int
    mean_profit: float
    mean_pre_tip_profit: float
    total_profit: float
    n_tipped: int
    mean_wins: float
    mean_spend: float


def summarize(m: int, strategy: str, reports: Sequence[ReplayReport]) -> SweepRow:
    profits = np.array([r.realized_profit for r in reports])
    return SweepRow(
        m=m, strategy=strategy, n_ads=len(reports),
        mean_profit=float(profits.mean()) if len(reports) else 0.0,
        mean_pre_tip_profit=float(np.mean([r.pre_tip_profit for r in reports])) if reports else 0.0,
        total_profit=float(profits.sum()),
        n_tipped=sum(r.tipped for r in reports),
        mean_wins=float(np.mean([r.wins for r in reports])) if reports else 0.0,
        mean_spend=float(np.mean([r.spend for r in reports])) if reports else 0.0,
    )


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reports: dict = field(default_factory=dict)  # (m, strategy) -> [ReplayReport, ...]

    def mean_profit(self, m: int, strategy: str) -> float:
        for row in self.rows:
            if row.m == m and row.strategy == strategy:
                return row.mean_profit
        raise KeyError((m, strategy))


def sweep_required_clicks(clicklog: ClickLog, m_values: Iterable[int], strategies: Sequence,
                          win: WinModel, pay=FIRST_PRICE, seed: int = 0, *, rho: float = 10.0,
                          mu: Optional[float] = None, e: Optional[int] = None,
                          cfg: Optional[OptimizerConfig] = None, competitors=None,
                          threads: int = 1) -> SweepResult:
    """Replay every ad for every required-clicks value and strategy.

    Strategies replaying the same ad see identical competitor bids (the stream
    depends only on ``seed`` and the ad id), so profits are paired.
    """
    clicklog = as_click_log(clicklog)
    if not clicklog:
        raise ValueError("click log is empty")
    m_values = list(m_values)
    if not m_values:
        raise ValueError("need at least one m value")
    result = SweepResult(rows=[])
    for m in m_values:
        for spec in strategies:
            proto = make_strategy(spec, cfg, win, seed)
            jobs = []
            for ad_id, flags in clicklog.items():
                deal = deal_for_ad(flags, m, rho, mu, e)
                jobs.append(((flags, deal, copy.deepcopy(proto), win, pay, seed),
                             dict(ad_id=ad_id, competitors=competitors)))
            reports = _replay_many(jobs, threads)
            result.reports[(m, proto.name)] = reports
            result.rows.append(summarize(m, proto.name, reports))
    return result


# --- deal selection -------------------------------------------------------------------------


@dataclass
class SelectionRow:
    m_max: int
    selector: str
    n_groups: int
    mean_group_profit: float
    mean_deal_profit: float


def _select_scores(kind, deals, states, bids, live, win, cfg):
    scores = []
    for i in live:
        deal, b = deals[i], bids[i]
        if kind == "rt":
            scores.append(marginal_value(deal, states[i], b, win, cfg.mode,
                                         threshold=cfg.normal_threshold) - b)
        else:
            scores.append(deal.mu * deal.rho - b)
    return scores


def run_selection_group(flags: Sequence[np.ndarray], deals: Sequence[Deal], selector: str,
                        win: WinModel, pay=FIRST_PRICE, seed: int = 0, *, group_key="group",
                        cfg: Optional[OptimizerConfig] = None, competitors=None) -> list[float]:
    """Greedy deal selection within one group; returns realized profit per deal.

    Every visit is offered to all live deals. Each computes its real-time bid;
    the selector picks one deal (``rt``: largest marginal value minus bid;
    ``static``: largest ``mu*rho - bid``) and that deal enters the auction with
    its bid. The click outcome comes from the chosen ad's own log at the
    current visit index.
    """
    if selector not in ("rt", "static"):
        raise ValueError(f"unknown selector {selector!r}")
    cfg = cfg or OptimizerConfig()
    horizon = max(d.e for d in deals)
    best, coin = auction_stream(as_field(competitors if competitors is not None else win),
                                seed, group_key, horizon)
    states = [DealState() for _ in deals]
    bidders = [RealTimeBidder(cfg) for _ in deals]
    bids = [0.0] * len(deals)
    for t in range(horizon):
        live = [i for i, d in enumerate(deals) if t < d.e]
        if not live:
            continue
        for i in live:
            bids[i] = bidders[i].bid(deals[i], states[i], win, pay)
        scores = _select_scores(selector, deals, states, bids, live, win, cfg)
        pick = live[int(np.argmax(scores))]
        b = bids[pick]
        if b > best[t] or (b == best[t] and coin[t]):
            states[pick].spend += pay(b)
            if flags[pick][t]:
                states[pick].clicks += 1
        for i in live:
            states[i].t += 1
    out = []
    for deal, st in zip(deals, states):
        out.append(deal.rho * st.clicks - st.spend if st.clicks >= deal.m else 0.0 - st.spend)
    return out


def make_groups(clicklog: ClickLog, group_size: int, seed: int, max_ctr: Optional[float] = None,
                n_groups: Optional[int] = None) -> list[list[str]]:
    ids = [a for a, f in clicklog.items() if max_ctr is None or estimate_ctr(f) <= max_ctr]
    order = np.random.default_rng([int(seed), 7]).permutation(len(ids))
    ids = [ids[i] for i in order]
    groups = [ids[i:i + group_size] for i in range(0, len(ids) - group_size + 1, group_size)]
    return groups[:n_groups] if n_groups is not None else groups


def selection_experiment(clicklog: ClickLog, m_max_values: Iterable[int], win: WinModel,
                         pay=FIRST_PRICE, seed: int = 0, *, group_size: int = 4, rho: float = 20.0,
                         total_visits: int = 15000, max_ctr: Optional[float] = 0.02,
                         n_groups: Optional[int] = None, selectors=("rt", "static"),
                         cfg: Optional[OptimizerConfig] = None, competitors=None
                         ) -> list[SelectionRow]:
    """Compare greedy selectors on random groups of ads.

    Ads above ``max_ctr`` are dropped first (``None`` keeps them). Each deal in
    a group gets required clicks drawn uniformly from ``0..m_max`` and expiry
    ``min(total_visits, impressions)``. Both selectors see the same groups,
    required clicks and auctions.
    """
    clicklog = as_click_log(clicklog)
    groups = make_groups(clicklog, group_size, seed, max_ctr, n_groups)
    rows = []
    for m_max in m_max_values:
        per = {s: [] for s in selectors}
        for gi, ids in enumerate(groups):
            rng = np.random.default_rng([int(seed), gi, int(m_max), 11])
            ms = rng.integers(0, m_max + 1, size=len(ids))
            flags = [clicklog[a] for a in ids]
            deals = [deal_for_ad(f, int(m), rho, e=total_visits) for f, m in zip(flags, ms)]
            for s in selectors:
                profits = run_selection_group(flags, deals, s, win, pay, seed,
                                              group_key=f"group{gi}", cfg=cfg, competitors=competitors)
                per[s].append(profits)
        for s in selectors:
            arr = np.array(per[s]) if per[s] else np.zeros((0, group_size))
            rows.append(SelectionRow(
                m_max=int(m_max), selector=s, n_groups=len(groups),
                mean_group_profit=float(arr.sum(axis=1).mean()) if len(arr) else 0.0,
                mean_deal_profit=float(arr.mean()) if arr.size else 0.0))
    return rows


# --- admissibility --------------------------------------------------------------------------


@dataclass
class AdmissionRow:
    m: int
    strategy: str
    n_ads: int
    n_admitted: int
    mean_profit_all: float
    mean_profit_admitted: float
    total_profit_all: float
    total_profit_admitted: float


def is_admissible(deal: Deal, win: WinModel, pay=FIRST_PRICE, threshold: float = 0.0,
                  cfg: Optional[OptimizerConfig] = None) -> tuple[bool, float, float]:
    """Admit a fresh deal iff its bid-optimized expected profit exceeds ``threshold``.

    Returns ``(admitted, best_bid, best_expected_profit)``.
    """
    bid, value = optimal_bid(deal, DealState(), win, pay, cfg)
    return value > threshold, bid, value


def admissibility_experiment(clicklog: ClickLog, m_values: Iterable[int], strategies: Sequence,
                             win: WinModel, pay=FIRST_PRICE, seed: int = 0, *, rho: float = 10.0,
                             threshold: float = 0.0, cfg: Optional[OptimizerConfig] = None,
                             competitors=None, threads: int = 1) -> list[AdmissionRow]:
    """Profit with and without admission control, per required-clicks value and strategy."""
    if not math.isfinite(threshold):
        raise ValueError("admission threshold must be finite")
    clicklog = as_click_log(clicklog)
    m_values = list(m_values)
    sweep = sweep_required_clicks(clicklog, m_values, strategies, win, pay, seed, rho=rho, cfg=cfg,
                                  competitors=competitors, threads=threads)
    rows = []
    for m in m_values:
        admitted = {ad_id: is_admissible(deal_for_ad(f, m, rho), win, pay, threshold, cfg)[0]
                    for ad_id, f in clicklog.items()}
        for (m_, name), reports in sweep.reports.items():
            if m_ != m:
                continue
            p_all = np.array([r.realized_profit for r in reports])
            p_adm = np.array([r.realized_profit for r in reports if admitted[r.ad_id]])
            rows.append(AdmissionRow(
                m=m, strategy=name, n_ads=len(reports), n_admitted=len(p_adm),
                mean_profit_all=float(p_all.mean()),
                mean_profit_admitted=float(p_adm.mean()) if len(p_adm) else 0.0,
                total_profit_all=float(p_all.sum()),
                total_profit_admitted=float(p_adm.sum())))
    return rows


# --- synthetic logs -------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticLogSpec:
    """Stand-in for a real click log: per-ad CTR uniform on ``ctr_range``."""

    n_ads: int
    impressions_per_ad: Union[int, tuple[int, int]] = 10000
    ctr_range: tuple[float, float] = (0.005, 0.02)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.ctr_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("ctr_range must be an interval inside [0, 1]")
        if self.n_ads < 0:
            raise ValueError("n_ads must be nonnegative")


def synthetic_click_log(spec: SyntheticLogSpec) -> dict[str, np.ndarray]:
    """Bernoulli(CTR) click flags per ad, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    width = max(4, len(str(max(spec.n_ads - 1, 0))))
    out = {}
    for i in range(spec.n_ads):
        n = spec.impressions_per_ad
        if not isinstance(n, int):
            n = int(rng.integers(n[0], n[1] + 1))
        ctr = rng.uniform(*spec.ctr_range)
        out[f"ad{i:0{width}d}"] = rng.random(n) < ctr
    return out


def generate_synthetic_log(spec: SyntheticLogSpec) -> list[ImpressionRecord]:
    """Synthetic log as impression records; see ``synthetic_click_log`` for the array form."""
    return to_records(synthetic_click_log(spec))


def to_records(clicklog: ClickLog) -> list[ImpressionRecord]:
    return [ImpressionRecord(ad_id, j, bool(c))
            for ad_id, flags in clicklog.items() for j, c in enumerate(flags)]


def as_click_log(log) -> dict[str, np.ndarray]:
    """Per-ad click flags from a mapping or from ImpressionRecords (grouped, ordered by seq)."""
    if isinstance(log, Mapping):
        return {ad_id: click_flags(f) for ad_id, f in log.items()}
    per_ad: dict[str, list[ImpressionRecord]] = {}
    for rec in log:
        per_ad.setdefault(rec.ad_id, []).append(rec)
    out = {}
    for ad_id, recs in per_ad.items():
        recs.sort(key=lambda rec: rec.seq)
        if any(a.seq == b.seq for a, b in zip(recs, recs[1:])):
            raise ValueError(f"duplicate seq in records of {ad_id}")
        out[ad_id] = np.fromiter((rec.clicked for rec in recs), dtype=bool, count=len(recs))
    return out


# --- timing ---------------------------------------------------------------------------------


@dataclass
class BenchRow:
    m: int
    repetitions: int
    full_mean_s: float
    full_p99_s: float
    reopt_mean_s: float
    reopt_p99_s: float


def bench_optimizer(m_values: Iterable[int], win: WinModel, pay=FIRST_PRICE, *, e: int = 10000,
                    rho: float = 10.0, mu: float = 0.01, cfg: Optional[OptimizerConfig] = None,
                    repetitions: int = 1000) -> list[BenchRow]:
    """Wall-clock cost of one bid optimization at a fresh state with ``m`` clicks required.

    ``full`` times the multi-start search used for a deal's first impressions;
    ``reopt`` the warm-started search used on later recomputations. Repetitions
    are interleaved across ``m_values`` so that drifting machine load is shared
    evenly instead of landing on whichever ``m`` happened to run at the time.
    """
    cfg = cfg or OptimizerConfig()
    deals = [Deal(m=int(m), e=e, rho=rho, mu=mu) for m in m_values]
    for deal in deals:
        next_bid(deal, DealState(), win, pay, cfg)  # warm up compiled code
    full = np.empty((len(deals), repetitions))
    reopt = np.empty((len(deals), repetitions))
    for i in range(repetitions):
        for k, deal in enumerate(deals):
            state = DealState(t=i % max(1, e // 2))
            t0 = time.perf_counter()
            next_bid(deal, state, win, pay, cfg)
            full[k, i] = time.perf_counter() - t0
            state.starts_done = cfg.multi_start_impressions
            state.opportunities_since_recompute = cfg.recompute_interval
            t0 = time.perf_counter()
            next_bid(deal, state, win, pay, cfg)
            reopt[k, i] = time.perf_counter() - t0
    rows = []
    for deal, f, r in zip(deals, full, reopt):
        rows.append(BenchRow(deal.m, repetitions, float(f.mean()), float(np.percentile(f, 99)),
                             float(r.mean()), float(np.percentile(r, 99))))
    return rows
