"""Structure-equation and Bianchi residuals against the finite-difference step,
for second- and fourth-order stencils."""

import argparse

import numpy as np

from alpha_bundle.bundle import FormCalculus
from alpha_bundle.families import make_normal
from alpha_bundle.verify import random_frame


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=float, nargs="+", default=[4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3])
    args = ap.parse_args()

    fam = make_normal()
    rng = np.random.default_rng(args.seed)
    draws = []
    for _ in range(args.samples):
        theta = fam.default_safe_box().sample(rng)
        draws.append((random_frame(rng, theta), rng.uniform(-1, 1), rng.uniform(-1, 1, (3, 2))))

    print(f"{'order':>5} {'step':>8} {'structure':>11} {'ratio':>6} {'Bianchi 2nd':>12} {'ratio':>6}")
    for order in (2, 4):
        prev = None
        for h in args.steps:
            st = bi = 0.0
            for u, a, xis in draws:
                fc = FormCalculus(fam, a, step=h, order=order)
                H = [fc.H(x)(u) for x in xis[:2]]
                st = max(st, sum(fc.structure_residuals(u, H[0], H[1])))
                bi = max(bi, fc.bianchi_residuals(u, xis)[1])
            r = ("", "") if prev is None else (f"{prev[0] / st:6.1f}", f"{prev[1] / bi:6.1f}")
            print(f"{order:5d} {h:8.4f} {st:11.2e} {r[0]:>6} {bi:12.2e} {r[1]:>6}")
            prev = (st, bi)


if __name__ == "__main__":
    main()
