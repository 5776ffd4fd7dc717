"""
A nucleus pushed around by its electron cloud
=============================================

In system 2 the nucleus is a classical particle of mass M feeling the
Hellmann-Feynman force of the spinor density.  The solver alternates between
"solve for u along q" and "move q under the force of u".  Heavier nuclei
respond less, so the outer iteration contracts faster.
"""
import numpy as np

from dirackg.solver import RunConfig, solve_system2

base = RunConfig(n=16, L=12.0, T=1.0, dt=0.05, s=1.75, v0=(0.05, 0.0, 0.0),
                 u0_center=(1.0, 0.5, 0.0), u0_amplitude=0.05)

for M in (100.0, 400.0):
    traj = solve_system2(base.replace(M=M))
    drift = traj.path.q[-1] - np.asarray(base.v0) * base.T
    print(f"M = {M:5.0f}: {len(traj.q_distances)} outer iterations, "
          f"first ratio {traj.q_ratios[0]:.2e}, deviation from free flight {drift}")
