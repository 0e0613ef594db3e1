"""Print Fisher metric, skewness, alpha-Christoffel symbols and curvature of the
normal family on a grid, closed form next to 64-node quadrature."""

import argparse

import numpy as np

from alpha_bundle.expectation import Strategy
from alpha_bundle.families import make_normal
from alpha_bundle.manifold import (christoffel_mixed, curvature_tensor, fisher_metric, sectional_curvature,
                                   skewness_tensor)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu", type=float, nargs="+", default=[-1.0, 0.0, 2.0])
    ap.add_argument("--sigma", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--alpha", type=float, nargs="+", default=[-1.0, 0.0, 1.0])
    ap.add_argument("--nodes", type=int, default=64)
    args = ap.parse_args()

    fam = make_normal()
    closed, quad = Strategy.closed_form(), Strategy.quadrature(args.nodes)
    head = f"{'mu':>5} {'sigma':>5} {'alpha':>5} {'g11':>9} {'g22':>9} {'T112':>9} {'T222':>9} " \
           f"{'G2_11':>9} {'G1_12':>9} {'G2_22':>9} {'R1212':>10} {'K':>7} {'quad err':>9}"
    print(head)
    for m in args.mu:
        for s in args.sigma:
            th = np.array([m, s])
            g, T = fisher_metric(fam, th, closed), skewness_tensor(fam, th, closed)
            for a in args.alpha:
                G = christoffel_mixed(fam, th, a, closed)
                R = curvature_tensor(fam, th, a, closed)
                Rq = curvature_tensor(fam, th, a, quad)
                err = max(np.max(np.abs(fisher_metric(fam, th, quad) - g)),
                          np.max(np.abs(christoffel_mixed(fam, th, a, quad) - G)),
                          np.max(np.abs(Rq - R)))
                K = sectional_curvature(fam, th, a, closed)
                print(f"{m:5.2f} {s:5.2f} {a:5.2f} {g[0, 0]:9.4f} {g[1, 1]:9.4f} {T[0, 0, 1]:9.4f} "
                      f"{T[1, 1, 1]:9.4f} {G[1, 0, 0]:9.4f} {G[0, 0, 1]:9.4f} {G[1, 1, 1]:9.4f} "
                      f"{R[0, 1, 0, 1] + 0.0:10.4f} {K + 0.0:7.3f} {err:9.1e}")


if __name__ == "__main__":
    main()
