"""Mean and max alpha_c against c on a seeded nested market.

    python3 scripts/phase_boundary.py --stocks 200 --investors 20 --threads 4
"""

import argparse
import logging

from pricelimit.critical import max_alpha_ci_histogram, sweep
from pricelimit.synthetic import nested_market

log = logging.getLogger("phase_boundary")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--stocks", type=int, default=200)
    ap.add_argument("--investors", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threshold", type=float, default=0.5)
    ap.add_argument("--tol", type=float, default=1e-3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    net = nested_market(args.stocks, args.investors, seed=args.seed)
    log.info("network %r", net)
    c_grid = [round(0.1 * k, 1) for k in range(1, 10)]
    agg = sweep(net, c_grid, collapse_threshold=args.threshold, tol=args.tol, workers=args.threads).aggregate()
    print(f"{'c':>4} {'1-c':>6} {'mean':>8} {'max':>8} {'on-diag':>8}")
    for c in c_grid:
        h = max_alpha_ci_histogram(net, c)
        print(f"{c:4.1f} {1 - c:6.3f} {agg[c]['mean']:8.4f} {agg[c]['max']:8.4f} {h.fraction_at_boundary:8.3f}")


if __name__ == "__main__":
    main()
