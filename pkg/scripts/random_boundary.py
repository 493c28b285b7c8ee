"""Slope of alpha_c against c under partial rewiring.

Also prints, per c, the mean of the largest one-step threshold over each
shock's neighbours, which is what the bisection tracks on dense random
graphs, next to the mean overlap share of those neighbours.

    python3 scripts/random_boundary.py --edges 12500 --trials 100
"""

import argparse
import logging

import numpy as np

from pricelimit.critical import neighbor_thresholds
from pricelimit.randomize import randomization_experiment
from pricelimit.synthetic import random_bipartite

log = logging.getLogger("random_boundary")


def overlap_profile(net, n_shocks, seed):
    rng = np.random.default_rng(seed)
    W = net.weight_matrix
    mean_share, max_share = [], []
    for j in rng.choice(net.n_stocks, n_shocks, replace=False):
        L = net.holding_mask[j]
        nbr = np.flatnonzero(W[:, L].sum(axis=1) > 0)
        nbr = nbr[nbr != j]
        share = W[nbr][:, L].sum(axis=1) / W[nbr].sum(axis=1)
        mean_share.append(share.mean())
        max_share.append(share.max())
    return float(np.mean(mean_share)), float(np.mean(max_share))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--stocks", type=int, default=500)
    ap.add_argument("--investors", type=int, default=50)
    ap.add_argument("--edges", type=int, default=12500)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--p-list", type=float, nargs="+", default=[1.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    net = random_bipartite(args.stocks, args.investors, args.edges, seed=args.seed)
    c_grid = [round(0.1 * k, 1) for k in range(1, 10)]
    res = randomization_experiment(net, args.p_list, args.trials, c_grid, seed=args.seed, workers=args.threads)
    for p, fit in res.fits.items():
        print(f"p={p:g}: slope {fit.slope:.3f} intercept {fit.intercept:.3f} r2 {fit.r2:.3f} ({fit.n_points} points)")
        for c, a, n in zip(c_grid, res.mean_alpha_c[p], res.n_excluded[p]):
            print(f"   c={c:.1f} mean alpha_c {a:.4f} sentinels {n}")

    mean_share, max_share = overlap_profile(net, 50, args.seed)
    print(f"neighbour overlap share: mean {mean_share:.3f}, max per shock {max_share:.3f}")
    print(f"implied slopes: -1/mean = {-1 / mean_share:.2f}, -1/max = {-1 / max_share:.2f}")
    for c in (0.1, 0.3, 0.5):
        tops = []
        for j in range(0, net.n_stocks, 10):
            _, vals = neighbor_thresholds(net, j, c, simplified=False)
            tops.append(vals.max())
        print(f"   c={c:.1f}: mean of max exact neighbour threshold {np.mean(tops):.4f}")


if __name__ == "__main__":
    main()
