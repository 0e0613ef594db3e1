"""Run the sample-based verification checks on a built-in family and write one
JSON report per check."""

import argparse
import pathlib

from alpha_bundle.families import make_exponential, make_normal
from alpha_bundle.verify import OPTIONAL, SUITE, run_suite

FAMILIES = {"normal": make_normal, "exponential": make_exponential}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", choices=sorted(FAMILIES), default="normal")
    ap.add_argument("--checks", nargs="*", default=None,
                    help=f"subset of {sorted(SUITE) + sorted(OPTIONAL) + ['geodesic_criterion']}")
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="reports")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for rep in run_suite(FAMILIES[args.family](), args.checks, seed=args.seed, samples=args.samples):
        (out / f"{rep.name}.json").write_text(rep.to_json())
        print(rep.summary())
        failed += not rep.passed
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()
