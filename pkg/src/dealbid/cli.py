"""``dealbid`` command-line front end.

Every command reads an optional JSON config, applies command-line overrides,
validates the result, runs one experiment and writes comma-separated reports
into the output directory. Outputs depend only on the config, the seed and
the input files; wall-clock timings appear only where asked for (``bench``,
or ``"timing": true``).

Output directory precedence: ``--out``, then ``$DEALBID_OUT``, then the
config's ``"out"``, then ``./dealbid-out``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import simulator as sim
from .optimizer import OptimizerConfig
from .profit import Deal, DealState, bid_objective
from .winmodel import FIRST_PRICE, ConstantWinModel, GaussianWinModel, UniformWinModel

OUT_ENV = "DEALBID_OUT"
DEFAULT_OUT = "dealbid-out"


class ConfigError(ValueError):
    pass


class LogFormatError(ValueError):
    pass


# --- config ---------------------------------------------------------------------------------

_WIN = {"kind": "uniform", "lo": 0.0, "hi": 0.04, "n_bidders": 4}
_SYNTH = {"n_ads": 200, "impressions": 10000, "ctr": [0.005, 0.02], "seed": 0}
_OPT = {f.name: f.default for f in fields(OptimizerConfig)}

_COMMON = {"seed": 0, "out": None, "threads": 1}
_REPLAY = {
    **_COMMON, "log": None, "synthetic": None, "win": _WIN, "competitors": None,
    "payment": "first_price", "optimizer": _OPT, "strategies": ["rt", "static"],
    "m": 50, "rho": 10.0, "mu": None, "e": None, "timing": False,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "replay": _REPLAY,
    "sweep": {**_REPLAY, "m": [0, 25, 50, 100, 150]},
    "admit": {**_REPLAY, "m": [0, 25, 50, 100, 150], "strategies": ["rt"], "threshold": 0.0},
    "select": {
        **_COMMON, "log": None, "synthetic": None, "win": _WIN, "competitors": None,
        "payment": "first_price", "optimizer": _OPT, "m_max": [0, 50, 100, 150], "rho": 20.0,
        "group_size": 4, "total_visits": 15000, "max_ctr": 0.02, "n_groups": None,
        "selectors": ["rt", "static"],
    },
    "bench": {
        **_COMMON, "win": _WIN, "payment": "first_price", "optimizer": _OPT,
        "m": [1, 10, 50, 100, 200, 400], "e": 10000, "rho": 10.0, "mu": 0.01, "repetitions": 1000,
    },
    "gen-log": {**_COMMON, "synthetic": _SYNTH},
    "objective-curve": {
        **_COMMON, "win": {"kind": "uniform", "lo": 0.0, "hi": 0.1, "n_bidders": 2},
        "payment": "first_price", "m": 25, "e": 3000, "rho": 15.0, "mu": 0.002,
        "clicks": 20, "remaining_visits": 3000, "spend": 0.0,
        "grid": {"lo": None, "hi": None, "n": 1000}, "modes": ["exact", "normal"],
    },
}

# keys whose value is a free-form block validated elsewhere
_OPEN_BLOCKS = {"win", "competitors"}


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        d = defaults[k]
        if isinstance(d, dict) and k not in _OPEN_BLOCKS and v is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{where}.{k} must be an object")
            out[k] = _merge(d, v, f"{where}.{k}")
        elif k == "synthetic" and v is not None:
            out[k] = _merge(_SYNTH, v, f"{where}.{k}")
        else:
            out[k] = v
    return out


def load_config(command: str, path: Optional[str]) -> dict:
    given = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            given = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(given, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    return _merge(DEFAULTS[command], given, "config")


def _int(cfg, key, lo=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int) or (lo is not None and v < lo):
        raise ConfigError(f"{key} must be an integer" + (f" >= {lo}" if lo is not None else ""))
    return v


def _num(cfg, key):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number")
    return float(v)


def _int_list(cfg, key):
    v = cfg[key]
    v = [v] if isinstance(v, int) and not isinstance(v, bool) else v
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool)
                                                   and x >= 0 for x in v):
        raise ConfigError(f"{key} must be a nonnegative integer or a non-empty list of them")
    return v


def parse_model(spec: dict, where: str = "win"):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    spec = dict(spec)
    kind = spec.pop("kind", None)
    spec.pop("count", None)
    allowed = {"uniform": {"lo", "hi", "n_bidders"}, "gaussian": {"mean", "sigma", "n_bidders"},
               "constant": {"p"}}
    if kind not in allowed:
        raise ConfigError(f"{where}.kind must be one of {sorted(allowed)}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")
    cls = {"uniform": UniformWinModel, "gaussian": GaussianWinModel, "constant": ConstantWinModel}[kind]
    if kind != "constant":
        spec.setdefault("n_bidders", 2)
    try:
        return cls(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_competitors(spec):
    """``[{"kind": ..., "count": k, ...}, ...]`` -> [(model, k)]; ``None`` -> None."""
    if spec is None:
        return None
    if not isinstance(spec, list) or not spec:
        raise ConfigError("competitors must be a non-empty list")
    groups = []
    for i, item in enumerate(spec):
        where = f"competitors[{i}]"
        if not isinstance(item, dict) or "count" not in item:
            raise ConfigError(f"{where} needs a count")
        count = item["count"]
        if not isinstance(count, int) or count < 0:
            raise ConfigError(f"{where}.count must be a nonnegative integer")
        groups.append((parse_model(item, where), count))
    return groups


def parse_payment(name):
    if name != "first_price":
        raise ConfigError("payment must be \"first_price\"")
    return FIRST_PRICE


def parse_optimizer(block: dict) -> OptimizerConfig:
    try:
        return OptimizerConfig(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimizer: {exc}") from None


def _strategies(cfg, key="strategies"):
    names = cfg[key]
    valid = {"rt", "static", "adaptive", "random"} if key == "strategies" else {"rt", "static"}
    if not isinstance(names, list) or not names or any(n not in valid for n in names):
        raise ConfigError(f"{key} must be a non-empty list drawn from {sorted(valid)}")
    return names


# --- click logs -----------------------------------------------------------------------------

LOG_HEADER = ["ad_id", "seq", "clicked"]


def read_click_log(path) -> dict[str, np.ndarray]:
    """Parse an ``ad_id,seq,clicked`` file into per-ad click flags ordered by ``seq``.

    Ads keep the order of their first appearance. Any malformed line aborts
    with its line number.
    """
    rows: dict[str, dict[int, bool]] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FileNotFoundError(f"cannot open click log {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LOG_HEADER:
            raise LogFormatError(f"{path}:1: expected header 'ad_id,seq,clicked'")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise LogFormatError(f"{path}:{line}: expected 3 fields, got {len(row)}")
            ad_id, seq, clicked = (x.strip() for x in row)
            if not ad_id:
                raise LogFormatError(f"{path}:{line}: empty ad_id")
            try:
                seq = int(seq)
            except ValueError:
                raise LogFormatError(f"{path}:{line}: seq {seq!r} is not an integer") from None
            if clicked not in ("0", "1"):
                raise LogFormatError(f"{path}:{line}: clicked must be 0 or 1, got {clicked!r}")
            per_ad = rows.setdefault(ad_id, {})
            if seq in per_ad:
                raise LogFormatError(f"{path}:{line}: duplicate seq {seq} for ad {ad_id}")
            per_ad[seq] = clicked == "1"
    if not rows:
        raise LogFormatError(f"{path}: click log has no records")
    return {ad: np.array([flags[s] for s in sorted(flags)], dtype=bool) for ad, flags in rows.items()}


def write_click_log(path, clicklog) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for ad_id, flags in clicklog.items():
            for j, c in enumerate(flags):
                w.writerow((ad_id, j, int(c)))


def _synthetic(block: dict) -> sim.SyntheticLogSpec:
    ctr = block["ctr"]
    imps = block["impressions"]
    try:
        return sim.SyntheticLogSpec(n_ads=int(block["n_ads"]),
                                    impressions_per_ad=imps if isinstance(imps, int) else tuple(imps),
                                    ctr_range=(float(ctr[0]), float(ctr[1])), seed=int(block["seed"]))
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"synthetic: {exc}") from None


def _load_log(cfg) -> dict[str, np.ndarray]:
    if cfg["log"] is not None and cfg["synthetic"] is not None:
        raise ConfigError("give either log or synthetic, not both")
    if cfg["log"] is not None:
        return read_click_log(cfg["log"])
    if cfg["synthetic"] is None:
        raise ConfigError("no click log: set log (path) or synthetic (generator settings)")
    return sim.synthetic_click_log(_synthetic(cfg["synthetic"]))


# --- reports --------------------------------------------------------------------------------


def write_table(path: Path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError(f"nothing to write to {path}")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _print_summary(rows: list[dict]) -> None:
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


# --- commands -------------------------------------------------------------------------------


def _replay_setup(cfg):
    win = parse_model(cfg["win"])
    comp = parse_competitors(cfg["competitors"])
    return (win, comp, parse_payment(cfg["payment"]), parse_optimizer(cfg["optimizer"]),
            _strategies(cfg), _load_log(cfg))


def _sweep(cfg):
    win, comp, pay, opt, strategies, clicklog = _replay_setup(cfg)
    mu = None if cfg["mu"] is None else _num(cfg, "mu")
    e = None if cfg["e"] is None else _int(cfg, "e", 1)
    return sim.sweep_required_clicks(
        clicklog, _int_list(cfg, "m"), strategies, win, pay, cfg["seed"], rho=_num(cfg, "rho"),
        mu=mu, e=e, cfg=opt, competitors=comp, threads=cfg["threads"])


def cmd_replay(cfg, out: Path) -> dict[str, list[dict]]:
    res = _sweep(cfg)
    ads = [r.row(timing=bool(cfg["timing"])) for reps in res.reports.values() for r in reps]
    return {"replay_ads.csv": ads, "replay_summary.csv": [asdict(r) for r in res.rows]}


def cmd_sweep(cfg, out: Path):
    res = _sweep(cfg)
    ads = [r.row(timing=bool(cfg["timing"])) for reps in res.reports.values() for r in reps]
    return {"sweep.csv": [asdict(r) for r in res.rows], "sweep_ads.csv": ads}


def cmd_admit(cfg, out: Path):
    win, comp, pay, opt, strategies, clicklog = _replay_setup(cfg)
    rows = sim.admissibility_experiment(
        clicklog, _int_list(cfg, "m"), strategies, win, pay, cfg["seed"], rho=_num(cfg, "rho"),
        threshold=_num(cfg, "threshold"), cfg=opt, competitors=comp, threads=cfg["threads"])
    return {"admission.csv": [asdict(r) for r in rows]}


def cmd_select(cfg, out: Path):
    win = parse_model(cfg["win"])
    comp = parse_competitors(cfg["competitors"])
    max_ctr = None if cfg["max_ctr"] is None else _num(cfg, "max_ctr")
    n_groups = None if cfg["n_groups"] is None else _int(cfg, "n_groups", 1)
    rows = sim.selection_experiment(
        _load_log(cfg), _int_list(cfg, "m_max"), win, parse_payment(cfg["payment"]), cfg["seed"],
        group_size=_int(cfg, "group_size", 1), rho=_num(cfg, "rho"),
        total_visits=_int(cfg, "total_visits", 1), max_ctr=max_ctr, n_groups=n_groups,
        selectors=tuple(_strategies(cfg, "selectors")), cfg=parse_optimizer(cfg["optimizer"]),
        competitors=comp)
    return {"selection.csv": [asdict(r) for r in rows]}


def cmd_bench(cfg, out: Path):
    rows = sim.bench_optimizer(
        _int_list(cfg, "m"), parse_model(cfg["win"]), parse_payment(cfg["payment"]),
        e=_int(cfg, "e", 1), rho=_num(cfg, "rho"), mu=_num(cfg, "mu"),
        cfg=parse_optimizer(cfg["optimizer"]), repetitions=_int(cfg, "repetitions", 1))
    return {"bench.csv": [asdict(r) for r in rows]}


def cmd_genlog(cfg, out: Path):
    clicklog = sim.synthetic_click_log(_synthetic(cfg["synthetic"]))
    out.mkdir(parents=True, exist_ok=True)
    write_click_log(out / "clicklog.csv", clicklog)
    return {"_summary": [{"ads": len(clicklog), "impressions": sum(map(len, clicklog.values())),
                          "clicks": int(sum(f.sum() for f in clicklog.values()))}]}


def cmd_objective_curve(cfg, out: Path):
    win = parse_model(cfg["win"])
    pay = parse_payment(cfg["payment"])
    try:
        deal = Deal(m=_int(cfg, "m", 0), e=_int(cfg, "e", 1), rho=_num(cfg, "rho"), mu=_num(cfg, "mu"))
        state = DealState.at(deal, clicks=_int(cfg, "clicks", 0),
                             remaining_visits=_int(cfg, "remaining_visits", 0), spend=_num(cfg, "spend"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = cfg["grid"]
    lo, hi = win.bounds()
    lo = lo if grid["lo"] is None else float(grid["lo"])
    hi = hi if grid["hi"] is None else float(grid["hi"])
    n = int(grid["n"])
    if n < 1 or hi < lo:
        raise ConfigError("grid needs n >= 1 and hi >= lo")
    bids = np.array([lo]) if n == 1 or hi == lo else np.linspace(lo, hi, n)
    modes = cfg["modes"]
    objs = {}
    for mode in modes:
        try:
            objs[mode] = bid_objective(deal, state, win, pay, mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    rows = [{"bid": float(b), **{f"profit_{m}": objs[m](float(b)) - state.spend for m in modes}}
            for b in bids]
    return {"objective_curve.csv": rows}


# aggregate table echoed by --summary when a command writes several
SUMMARY_TABLE = {"replay": "replay_summary.csv", "sweep": "sweep.csv"}

COMMANDS = {
    "replay": (cmd_replay, "replay a click log with one or more strategies"),
    "sweep": (cmd_sweep, "paired profit across required-clicks values"),
    "select": (cmd_select, "greedy deal selection: real-time vs static ranking"),
    "admit": (cmd_admit, "profit with and without admission control"),
    "bench": (cmd_bench, "wall-clock cost of one bid optimization"),
    "gen-log": (cmd_genlog, "write a synthetic click log"),
    "objective-curve": (cmd_objective_curve, "expected profit over a bid grid"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run config")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", metavar="PATH", help=f"output directory (else ${OUT_ENV}, config, ./{DEFAULT_OUT})")
    common.add_argument("--threads", type=int, help="worker threads across ads (default 1)")
    common.add_argument("--summary", action="store_true", help="print aggregate rows to stdout")
    common.add_argument("--log", metavar="PATH", help="click log CSV (replay/sweep/select/admit)")
    common.add_argument("--timing", action="store_true", help="add optimizer timing columns to per-ad rows")

    parser = argparse.ArgumentParser(prog="dealbid", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return parser


def _resolve_out(arg: Optional[str], cfg: dict) -> Path:
    if arg is not None:
        return Path(arg)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(cfg["out"] or DEFAULT_OUT)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cmd, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.command, args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.threads is not None:
            cfg["threads"] = args.threads
        if args.log is not None:
            if "log" not in cfg:
                raise ConfigError(f"{args.command} does not read a click log")
            cfg["log"], cfg["synthetic"] = args.log, None
        if args.timing:
            if "timing" not in cfg:
                raise ConfigError(f"{args.command} has no timing columns to add")
            cfg["timing"] = True
        _int(cfg, "seed")
        _int(cfg, "threads", 1)
        out = _resolve_out(args.out, cfg)
        tables = cmd(cfg, out)
        summary = tables.pop("_summary", None)
        out.mkdir(parents=True, exist_ok=True)  # only once there is something to write
        for fname, rows in tables.items():
            write_table(out / fname, rows)
        if summary is None:
            summary = tables[SUMMARY_TABLE.get(args.command, next(iter(tables)))]
    except (ConfigError, LogFormatError) as exc:
        print(f"dealbid: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"dealbid: error: {exc}", file=sys.stderr)
        return 1
    if args.summary and summary:
        _print_summary(summary)
    return 0


def main(argv=None) -> None:
    try:
        sys.exit(run(argv))
    except BrokenPipeError:
        # stdout closed early (e.g. piped into head); the report files are complete
        sys.stderr.close()
        sys.exit(0)


if __name__ == "__main__":
    main()
