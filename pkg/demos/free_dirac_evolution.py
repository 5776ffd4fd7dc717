"""
Free Dirac evolution on a periodic box
======================================

A gaussian spinor is pushed through the exact free flow e^{itD} in Fourier
space.  The flow is unitary, so every Sobolev norm stays put while the packet
spreads out and its sup norm drops.
"""
import numpy as np

from dirackg import make_grid
from dirackg.dirac import free_step, gaussian_spinor
from dirackg.norms import lp_norm, sobolev_norm

grid = make_grid(32, 24.0)
u0 = gaussian_spinor(grid, amplitude=1.0, width=1.2, spin=np.array([1, 0, 0, 1]) / np.sqrt(2))

print(f"{'t':>5} {'L2':>12} {'H^1.5':>12} {'Linf':>10}")
for t in (0.0, 0.5, 1.0, 2.0, 4.0):
    u = free_step(u0, t)
    print(f"{t:5.1f} {sobolev_norm(u, 0):12.9f} {sobolev_norm(u, 1.5):12.9f} "
          f"{lp_norm(u.values, grid, np.inf):10.5f}")

# the group law: two half steps equal one full step up to round-off
u_half = free_step(free_step(u0, 1.0), 1.0)
u_full = free_step(u0, 2.0)
print("group law defect:", np.abs(u_half.values - u_full.values).max())
