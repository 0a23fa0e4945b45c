"""Empirical t^{n/2} decay of the Born-truncated e^{itG} eta_a(G) kernel.

Prints the normalized sup per time and the order-2/order-1 ratio, then the
refinement drift and the free control.

    python3 scripts/decay_headline.py [coupling] [a]
"""

import sys

import numpy as np

from displab import potential as pot
from displab import propagator as prop


def main(argv):
    g = float(argv[0]) if argv else 0.1
    a = float(argv[1]) if len(argv) > 1 else 0.05
    tg = prop.t_grid_default(24, 1.0, 100.0)
    rep = prop.dispersive_decay_report(pot.gaussian(g), a, tg, 2, (16, 0))
    print(f"{'t':>10} {'t^2 sup|K|':>14} {'order ratio':>12}")
    for t, m, r in zip(rep.t_grid, rep.normalized, rep.order_ratio):
        print(f"{t:10.4g} {m:14.6e} {r:12.3e}")
    free = prop.free_band_limited_constant(a, tg)
    print(f"max normalized   {rep.max_normalized:.6e}")
    print(f"refined          {rep.refined_max_normalized:.6e} (drift {rep.drift:.2%})")
    print(f"max order ratio  {np.max(rep.order_ratio):.3e}")
    print(f"free constant    {free:.6e}")


if __name__ == "__main__":
    main(sys.argv[1:])
