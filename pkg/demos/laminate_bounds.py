"""A two-phase plane-strain laminate reproduces the parallel and series bounds.

    python3 demos/laminate_bounds.py
"""

from rvefem import BCKind, LinearElastic, effective_tangent, generate_laminate_2d
from rvefem.oracles import laminate_bounds

mesh = generate_laminate_2d(10, 4, 0.5)
materials = {1: LinearElastic(1.0, 0.0), 2: LinearElastic(10.0, 0.0)}
C = effective_tangent(mesh, materials, BCKind.PDBC).C_eff
b = laminate_bounds(1.0, 10.0, 0.5)

print(f"along the layers  C22 = {C[1, 1]:.8f}   parallel bound {b.voigt:.8f}")
print(f"across the layers C11 = {C[0, 0]:.8f}   series bound   {b.reuss:.8f}")
