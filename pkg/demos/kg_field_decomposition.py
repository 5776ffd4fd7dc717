"""
Splitting the Klein-Gordon field of a moving nucleus
====================================================

For a nucleus on a path q(t) the field W solving (d_tt + 1 - Delta) W = chi(x - q)
splits into a boosted Yukawa potential W1 that rides along with the nucleus, a
free wave W2 launched by the mismatch at t = 0, and W3 which only sees the
acceleration.  Here we check the pieces add up to the direct Duhamel integral,
and that W3 vanishes on an inertial path.
"""
import numpy as np

from dirackg import make_grid
from dirackg.kleingordon import (ChargeDensity, KGState, NucleusPath, build_W1,
                                 build_W2, build_W3, kg_duhamel_direct)

grid = make_grid(32, 24.0)
chi = ChargeDensity(grid, 1.0, 1.0)
state0 = KGState.zero(grid)
t, dt = 2.0, 0.005

for label, path in [("inertial", NucleusPath.inertial(t, dt, (0.3, 0.0, 0.0))),
                    ("oscillating", NucleusPath.oscillating(t, dt, amplitude=0.15, omega=1.5))]:
    W1 = build_W1(chi, path, t).values
    W2 = build_W2(chi, state0, t, q0=path.q[0], v0=path.v0).values
    W3 = build_W3(chi, path, t, dt).values
    direct = kg_duhamel_direct(chi, path, state0, t, dt).values
    print(f"{label:12s} |W1|max {np.abs(W1).max():.4e}  |W2|max {np.abs(W2).max():.4e}  "
          f"|W3|max {np.abs(W3).max():.3e}  |sum - direct| {np.abs(W1 + W2 + W3 - direct).max():.2e}")
