"""Stretch a rubber particle composite to F11 = 1.5 and print the averaged history.

Only H11 is prescribed; the other eight gradient components are left free, so
the cell contracts laterally and the free stress components stay at zero.

    python3 demos/rubber_composite.py [n]
"""

import sys

import numpy as np

from rvefem import (BCKind, MacroLoad, MooneyRivlin, SolveControls, build_constraints,
                    generate_voxel_sphere, pair_periodic_nodes, run, write_rveout)


def main(n=10):
    mesh = generate_voxel_sphere(n, 0.3)
    materials = {1: MooneyRivlin(0.4, 0.1, 20.0),    # matrix
                 2: MooneyRivlin(4.0, 1.0, 200.0)}   # particle
    load = MacroLoad.from_components(3, {(0, 0): 0.5})
    cs = build_constraints(mesh, pair_periodic_nodes(mesh), load, BCKind.PDBC)
    print(f"{mesh.n_elements} elements, {cs.n_unknowns} unknowns "
          f"({cs.n_macro} of them macroscopic)")

    res = run(mesh, materials, cs, load, SolveControls(n_steps=10))
    for rec in res.records:
        print(f"t={rec.time:4.2f}  F11={rec.F_bar[0, 0]:.4f}  F22={rec.F_bar[1, 1]:.4f}  "
              f"P11={rec.P_bar[0, 0]:.5f}  max|P_free|={np.abs(rec.P_bar.ravel()[1:]).max():.1e}")
    print("\nlast record in rveout format:")
    write_rveout(res.records[-1:], sys.stdout)


if __name__ == '__main__':
    main(*(int(a) for a in sys.argv[1:]))
