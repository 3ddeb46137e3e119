"""Fit the five Florentine models and print the comparison table.

Short runs by default; pass --iters 20000 for the full-length chains.
"""

import argparse

from latentspace import GeometrySpec, SamplerConfig, florentine, model_comparison, sample_posterior
from latentspace.clustering import spectral_cluster
from latentspace.evaluation import posterior_mean_state


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    net = florentine()
    cfg = SamplerConfig(iters=args.iters, burn_in=args.iters // 4, thin=10, seed=args.seed)
    print("model\tWAIC\tmean\tML\tMAP\tCM\tK\tmodularity")
    for name in ("R1", "R2", "R3", "S1", "S2"):
        g = GeometrySpec.parse(name)
        ps = sample_posterior(net, g, cfg=cfg)
        row = model_comparison(ps, net)
        cl = spectral_cluster(posterior_mean_state(ps).Z, g.spherical, net)
        print(f"{name}\t{row['waic']:.2f}\t{row['mean_loglik']:.2f}\t{row['ml_loglik']:.2f}"
              f"\t{row['map_loglik']:.2f}\t{row['cm_loglik']:.2f}\t{cl.K}\t{cl.modularity:.3f}")


if __name__ == "__main__":
    main()
