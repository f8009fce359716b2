"""Wall-clock timings of the series and diffeomorphism kernels at desk scale.

Usage: python3 scripts/time_kernels.py [--order N] [--dim D] [--repeat R]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from folia.geometry import FormalVectorField, diffeo_compose, diffeo_invert, exp_field, lie_bracket, log_diffeo
from folia.jets import TruncatedSeries, layout


def random_field(rng, dim: int, order: int, min_degree: int) -> FormalVectorField:
    lay = layout(dim, order)
    comps = rng.normal(size=(dim, lay.size))
    comps[:, : lay.starts[min_degree]] = 0.0
    return FormalVectorField(dim, order, comps)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--order", type=int, default=12)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    n, d = args.order, args.dim
    a = TruncatedSeries(d, n, rng.normal(size=layout(d, n).size))
    b = TruncatedSeries(d, n, rng.normal(size=layout(d, n).size))
    x = random_field(rng, d, n, 1) * 0.5
    y = random_field(rng, d, n, 2)
    phi = exp_field(x)
    psi = exp_field(y)
    cases = {
        "series product": lambda: a * b,
        "lie bracket": lambda: lie_bracket(x, y),
        "exp (linear part)": lambda: exp_field(x),
        "exp (valuation 2)": lambda: exp_field(y),
        "log": lambda: log_diffeo(psi),
        "compose": lambda: diffeo_compose(phi, psi),
        "invert": lambda: diffeo_invert(phi),
    }
    print(f"dim {d}, order {n}, {layout(d, n).size} monomials per component")
    for name, fn in cases.items():
        t = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        print(f"  {name:<20s} {1e3 * t:8.3f} ms")


if __name__ == "__main__":
    main()
