"""Command-line entry point: ``pricelimit <sweep|metrics|randomize|waves|cascade>``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .contagion import CascadeError, run_all_single_shocks, run_cascade
from .critical import driving_node_probability, max_alpha_ci_histogram, sweep
from .metrics import bipartite_k_core_index, k_core_index, knn_degree, stock_metrics
from .network import (
    HoldingsError,
    group_by_mapping,
    load_holdings,
    read_holdings_csv,
    read_mapping_csv,
    stock_projection,
)
from .randomize import randomization_experiment
from .waves import (
    detect_waves,
    event_buckets,
    kcore_trajectory,
    max_pd_timeline,
    normalize_events,
    parse_sessions,
    read_events_csv,
    simulated_kcore_trajectory,
)

log = logging.getLogger("pricelimit")


@dataclass
class RunConfig:
    holdings: str | None = None
    mapping: str | None = None
    events: str | None = None
    c_grid: list[float] = field(default_factory=lambda: grid("0.1:0.9:0.1"))
    alpha_grid: list[float] | None = None
    collapse_threshold: float = 0.5
    tol: float = 1e-3
    max_steps: int | None = None
    seed: int | None = None
    trials: int = 600
    p_list: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    threads: int = 1
    out_dir: str = "out"
    kcore_graph: str = "projection"
    sessions: list[str] = field(default_factory=lambda: ["09:30-11:30", "13:00-15:00"])
    gap_tolerance: int = 0
    equality_tol: float = 0.0
    shock: list[str] | None = None
    bucket_minutes: int = 1

    def validate(self, command: str) -> None:
        if not self.c_grid or any(not 0 < c < 1 for c in self.c_grid):
            raise ValueError("c-grid must be nonempty with values in (0, 1)")
        if self.alpha_grid is not None and any(not 0 <= a <= 1 for a in self.alpha_grid):
            raise ValueError("alpha-grid values must lie in [0, 1]")
        if not 0 < self.collapse_threshold <= 1:
            raise ValueError("collapse-threshold must lie in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.kcore_graph not in ("projection", "bipartite"):
            raise ValueError("kcore-graph must be projection or bipartite")
        if command == "randomize":
            if self.seed is None:
                raise ValueError("randomize requires --seed")
            if self.trials < 1 or not self.p_list or any(not 0 <= p <= 1 for p in self.p_list):
                raise ValueError("trials must be positive and p values in [0, 1]")
        if command != "waves" and not self.holdings:
            raise ValueError("--holdings is required")
        if command == "waves" and not self.events:
            raise ValueError("--events is required")


def grid(text: str) -> list[float]:
    """``lo:hi:step`` (inclusive) or a comma list."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        out, k = [], 0
        while lo + k * step <= hi + 1e-9:
            out.append(round(lo + k * step, 10))
            k += 1
        return out
    return [float(x) for x in text.split(",") if x.strip()]


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, command: str, outputs: list[Path]) -> None:
    inputs = {k: sha256(v) for k in ("holdings", "mapping", "events") if (v := getattr(cfg, k))}
    manifest = {
        "tool": "pricelimit",
        "version": __version__,
        "command": command,
        "config": dataclasses.asdict(cfg),
        "inputs": inputs,
        "outputs": {p.name: sha256(p) for p in outputs},
    }
    path = Path(cfg.out_dir) / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_network(cfg: RunConfig):
    records = read_holdings_csv(cfg.holdings)
    if cfg.mapping:
        records, unmapped = group_by_mapping(records, read_mapping_csv(cfg.mapping))
        return load_holdings(records)
    return load_holdings(records, first_line=2)


# commands ------------------------------------------------------------------


def cmd_sweep(cfg: RunConfig) -> list[Path]:
    net = load_network(cfg)
    out = Path(cfg.out_dir)
    res = sweep(
        net, cfg.c_grid, cfg.alpha_grid, shocks=cfg.shock, collapse_threshold=cfg.collapse_threshold,
        tol=cfg.tol, max_steps=cfg.max_steps, workers=cfg.threads,
    )
    files = []
    if cfg.alpha_grid is not None:
        rows = [(c, a, s, f, col) for (c, a, s), (f, col) in sorted(res.grid.items())]
        files.append(write_csv(out / "sweep_grid.csv", ["c", "alpha", "shock_id", "failed_fraction", "collapsed"], rows))
    rows = [(c, s, a.value, a.status) for (c, s), a in sorted(res.alpha_c_per_shock.items())]
    files.append(write_csv(out / "alpha_c_per_shock.csv", ["c", "shock_id", "alpha_c", "status"], rows))
    agg = res.aggregate()
    rows = [(c, v["mean"], v["max"], v["n_shocks"], v["n_always"], v["n_never"]) for c, v in agg.items()]
    files.append(write_csv(out / "alpha_c_aggregate.csv", ["c", "mean_alpha_c", "max_alpha_c", "n_shocks", "n_always", "n_never"], rows))
    for c, v in agg.items():
        print(f"c={c:g} mean alpha_c={v['mean']:.4f} max={v['max']:.4f} (1-c={1 - c:.4f})")
    return files


def cmd_metrics(cfg: RunConfig) -> list[Path]:
    net = load_network(cfg)
    out = Path(cfg.out_dir)
    c0 = cfg.c_grid[0]
    p_d = driving_node_probability(net, c0, cfg.equality_tol)
    rows = [
        (m.stock_id, m.degree, m.branching, m.average_nestedness, m.k_core, m.p_d)
        for m in stock_metrics(net, p_d, cfg.kcore_graph)
    ]
    files = [write_csv(out / "metrics.csv", ["stock_id", "degree", "branching", "avg_nestedness", "k_core", "p_d"], rows)]
    files.append(write_csv(out / "p_d.csv", ["stock_id", "p_d"], sorted(p_d.items())))
    knn_s, knn_m = knn_degree(net)
    files.append(write_csv(out / "knn_stocks.csv", ["degree", "knn"], sorted(knn_s.items())))
    files.append(write_csv(out / "knn_investors.csv", ["degree", "knn"], sorted(knn_m.items())))
    hist_rows = []
    for c in cfg.c_grid:
        h = max_alpha_ci_histogram(net, c)
        for k, frac in enumerate(h.fractions):
            hist_rows.append((c, k, float(h.edges[k]), float(h.edges[k + 1]), float(frac)))
    files.append(write_csv(out / "max_alpha_ci_hist.csv", ["c", "bin", "lo", "hi", "fraction"], hist_rows))
    return files


def cmd_randomize(cfg: RunConfig) -> list[Path]:
    net = load_network(cfg)
    out = Path(cfg.out_dir)
    res = randomization_experiment(
        net, cfg.p_list, cfg.trials, cfg.c_grid, cfg.collapse_threshold, cfg.tol, cfg.seed,
        max_steps=cfg.max_steps, workers=cfg.threads,
    )
    rows = [
        (p, c, res.mean_alpha_c[p][k], res.n_excluded[p][k])
        for p in cfg.p_list
        for k, c in enumerate(cfg.c_grid)
    ]
    files = [write_csv(out / "randomize_results.csv", ["p", "c", "mean_alpha_c", "n_excluded"], rows)]
    rows = [(p, f.slope, f.intercept, f.r2) for p, f in res.fits.items()]
    files.append(write_csv(out / "randomize_fit.csv", ["p", "slope", "intercept", "r2"], rows))
    for p, f in res.fits.items():
        print(f"p={p:g} slope={f.slope:.3f} intercept={f.intercept:.3f} r2={f.r2:.3f}")
    return files


def cmd_waves(cfg: RunConfig) -> list[Path]:
    out = Path(cfg.out_dir)
    sessions = parse_sessions(cfg.sessions)
    events = normalize_events(read_events_csv(cfg.events), sessions)
    waves = detect_waves(events, cfg.gap_tolerance, sessions)
    rows = [
        (k, w.day.isoformat(), w.session, w.start.strftime("%H:%M"), w.end.strftime("%H:%M"),
         len(w.counts), sum(w.counts.values()), w.peak.strftime("%H:%M"))
        for k, w in enumerate(waves)
    ]
    files = [write_csv(out / "waves.csv", ["wave_id", "day", "session", "start", "end", "n_minutes", "n_failures", "peak"], rows)]
    rows = [
        (k, t.strftime("%Y-%m-%d %H:%M"), n, t in w.peaks)
        for k, w in enumerate(waves)
        for t, n in sorted(w.counts.items())
    ]
    files.append(write_csv(out / "wave_counts.csv", ["wave_id", "minute", "count", "is_peak"], rows))
    if cfg.holdings:
        net = load_network(cfg)
        p_d = driving_node_probability(net, cfg.c_grid[0], cfg.equality_tol)
        tl = max_pd_timeline(events, p_d, waves, sessions)
        rows = [(t.strftime("%Y-%m-%d %H:%M"), w, d, m) for t, w, d, m in tl.rows]
        files.append(write_csv(out / "max_pd_timeline.csv", ["minute", "wave_id", "minutes_to_peak", "max_p_d"], rows))
        corr = [("all", "pre", tl.pre_peak), ("all", "post", tl.post_peak)]
        for k, (pre, post) in enumerate(tl.per_wave):
            corr += [(f"wave{k}", "pre", pre), (f"wave{k}", "post", post)]
        files.append(write_csv(out / "max_pd_correlation.csv", ["scope", "side", "r", "p_value", "n"],
                               [(a, b, s.r, s.p_value, s.n) for a, b, s in corr]))
        core = bipartite_k_core_index(net) if cfg.kcore_graph == "bipartite" else k_core_index(stock_projection(net))
        traj = kcore_trajectory(event_buckets(events, cfg.bucket_minutes, sessions), core)
        rows = [(b.strftime("%Y-%m-%d %H:%M"), s.n, s.mean, s.q1, s.median, s.q3) for b, s in traj.items()]
        files.append(write_csv(out / "kcore_events.csv", ["bucket", "n", "mean", "q1", "median", "q3"], rows))
    return files


def cmd_cascade(cfg: RunConfig) -> list[Path]:
    net = load_network(cfg)
    out = Path(cfg.out_dir)
    alpha = cfg.alpha_grid[0] if cfg.alpha_grid else 1.0
    c = cfg.c_grid[0]
    if cfg.shock:
        res = run_cascade(net, cfg.shock, alpha, c, cfg.max_steps)
        files = [write_csv(out / "cascade_timeline.csv", ["tau", "stock_id"],
                           [(t, s) for t, g in res.failure_timeline for s in g])]
        files.append(write_csv(out / "cascade_values.csv", ["tau", "market_value"], list(enumerate(res.market_value))))
        files.append(write_csv(out / "cascade_summary.csv",
                               ["shock", "alpha", "c", "steps", "final_failed_fraction", "surviving_market_value", "truncated"],
                               [(";".join(res.shock), alpha, c, res.steps, res.final_failed_fraction, res.surviving_market_value, res.truncated)]))
        print(f"failed {res.final_failed_fraction:.4f} of stocks in {res.steps} steps")
        return files
    results = run_all_single_shocks(net, alpha, c, cfg.max_steps, cfg.threads)
    rows = [(s, alpha, c, r.steps, r.final_failed_fraction, r.surviving_market_value, r.truncated) for s, r in sorted(results.items())]
    files = [write_csv(out / "cascade_all.csv", ["shock", "alpha", "c", "steps", "final_failed_fraction", "surviving_market_value", "truncated"], rows)]
    core = bipartite_k_core_index(net) if cfg.kcore_graph == "bipartite" else k_core_index(stock_projection(net))
    traj = simulated_kcore_trajectory(results.values(), core)
    files.append(write_csv(out / "kcore_by_step.csv", ["tau", "n_shocks", "mean", "q1", "median", "q3"],
                           [(t, s.n, s.mean, s.q1, s.median, s.q3) for t, s in traj.items()]))
    return files


COMMANDS = {
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
    "randomize": cmd_randomize,
    "waves": cmd_waves,
    "cascade": cmd_cascade,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pricelimit", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--holdings")
        p.add_argument("--mapping")
        p.add_argument("--events")
        p.add_argument("--c-grid", type=grid)
        p.add_argument("--c", dest="c_single", type=float, help="single c value")
        p.add_argument("--alpha-grid", type=grid)
        p.add_argument("--alpha", dest="alpha_single", type=float, help="single alpha value")
        p.add_argument("--collapse-threshold", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-steps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--p-list", type=grid)
        p.add_argument("--threads", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--kcore-graph", choices=["projection", "bipartite"])
        p.add_argument("--sessions", nargs="+")
        p.add_argument("--gap-tolerance", type=int)
        p.add_argument("--equality-tol", type=float)
        p.add_argument("--bucket-minutes", type=int)
        p.add_argument("--shock", nargs="+")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def make_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            if k in ("c_grid", "alpha_grid", "p_list") and isinstance(v, str):
                v = grid(v)
            setattr(cfg, k, v)
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if args.c_single is not None:
        cfg.c_grid = [args.c_single]
    if args.alpha_single is not None:
        cfg.alpha_grid = [args.alpha_single]
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        cfg = make_config(args)
        cfg.validate(args.command)
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](cfg)
        write_manifest(cfg, args.command, files)
    except (HoldingsError, CascadeError, ValueError, OSError, KeyError) as exc:
        print(f"pricelimit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
