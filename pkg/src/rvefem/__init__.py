"""Finite-element RVE homogenization with linear and periodic displacement BCs."""

from .mesh import (Mesh, FacePairing, MeshError, MatchFailure, load_mesh,
                   generate_voxel_sphere, generate_laminate_2d, pair_periodic_nodes)
from .material import LinearElastic, MooneyRivlin, PointState, InvertedElement, evaluate, \
    strain_energy, tangent_check
from .constraints import BCKind, MacroLoad, ConstraintSystem, split_displacement, \
    chain_corner_masters, build_constraints
from .solver import LoadCurve, SolveControls, FieldState, NonConvergence, RVEProblem, \
    assemble, solve_linear, run
from .homogenize import HomogenizedRecord, EffectiveTangent, average_stress, \
    average_gradient, make_record, effective_tangent
from .deck_io import parse_deck, print_deck, read_deck, write_rveout, parse_rveout, \
    write_field_snapshot

__version__ = '0.1.0'
