"""Compare linear and periodic boundary conditions on a stiff-particle cell.

The linear (affine boundary) condition over-constrains the cell, so its
effective stiffness is never below the periodic one. Tiling more unit cells
into the box shrinks the difference.

    python3 demos/boundary_conditions.py
"""

import numpy as np

from rvefem import BCKind, LinearElastic, effective_tangent, generate_voxel_sphere

np.set_printoptions(precision=4, suppress=True, linewidth=100)

materials = {1: LinearElastic(1.0, 0.3), 2: LinearElastic(10.0, 0.3)}

mesh = generate_voxel_sphere(8, 0.3)
C = {bc: effective_tangent(mesh, materials, bc).C_eff for bc in BCKind}
print("periodic C_eff:\n", C[BCKind.PDBC])
print("linear - periodic:\n", C[BCKind.LDBC] - C[BCKind.PDBC])
print("eigenvalues of the difference:",
      np.linalg.eigvalsh(0.5 * (C[BCKind.LDBC] - C[BCKind.PDBC]
                                + (C[BCKind.LDBC] - C[BCKind.PDBC]).T)))

print("\ncells per edge   C1111 linear   C1111 periodic   gap")
for cells in (1, 2, 4):
    m = generate_voxel_sphere(4, 0.3, n_cells=cells)
    c = {bc: effective_tangent(m, materials, bc, columns=[0]).C_eff[0, 0] for bc in BCKind}
    gap = (c[BCKind.LDBC] - c[BCKind.PDBC]) / c[BCKind.PDBC]
    print(f"{cells:14d}   {c[BCKind.LDBC]:12.5f}   {c[BCKind.PDBC]:14.5f}   {100 * gap:.2f}%")
