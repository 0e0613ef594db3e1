"""Parallel transport along mu -> mu + t at sigma = 1 against the matrix-exponential
solution, and conservation laws along alpha = 0 geodesics of the normal family."""

import argparse

import numpy as np

from alpha_bundle.bundle import transport_path
from alpha_bundle.families import make_normal
from alpha_bundle.manifold import Trajectory, geodesic, speed
from alpha_bundle.verify import transport_oracle_matrix


def transport(fam, steps):
    T = np.sqrt(2.0) * np.pi
    line = Trajectory.from_function(lambda t: np.array([t, 1.0]), lambda t: np.array([1.0, 0.0]), T, steps)
    _, vec = transport_path(fam, line, [1.0, 0.0], 0.0)
    oracle = np.array([transport_oracle_matrix(t) @ [1.0, 0.0] for t in line.t])
    print(f"transport over t = sqrt(2) pi with {steps} steps: end vector {vec[-1].round(10)}, "
          f"max deviation from expm {np.max(np.abs(vec - oracle)):.2e}")


def conservation(fam, theta0, v0, dts):
    print(f"geodesic from {theta0} with velocity {v0} over t in [0, 1]")
    print(f"{'dt':>8} {'semicircle drift':>17} {'speed drift':>12}")
    for dt in dts:
        traj = geodesic(fam, theta0, v0, 0.0, 1.0, dt, diagnostics=False)
        mu, s = traj.theta.T
        c = mu[0] + 2 * s[0] * v0[1] / v0[0]
        inv = (mu - c) ** 2 + 2 * s**2
        sp = speed(fam, traj)
        print(f"{dt:8.4f} {np.max(np.abs(inv / inv[0] - 1)):17.3e} {np.max(np.abs(sp / sp[0] - 1)):12.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--theta0", type=float, nargs=2, default=[0.0, 1.0])
    ap.add_argument("--v0", type=float, nargs=2, default=[1.0, 0.5])
    args = ap.parse_args()
    fam = make_normal()
    transport(fam, args.steps)
    conservation(fam, args.theta0, args.v0, [0.2, 0.1, 0.05, 0.025, 1e-3])


if __name__ == "__main__":
    main()
