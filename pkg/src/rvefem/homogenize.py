"""
Volume averaging of microscopic fields and effective stiffness extraction.

PK1 stress is averaged over the reference volume, Cauchy stress over the
deformed volume. The average displacement gradient is recomputed from the
nodal displacements rather than taken from the applied load, so it doubles as
a check on the boundary conditions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _elements
from .constraints import BCKind, MacroLoad, build_constraints
from .mesh import pair_periodic_nodes

__all__ = ['HomogenizedRecord', 'EffectiveTangent', 'VOIGT_PAIRS',
           'average_stress', 'average_gradient', 'make_record',
           'record_from_state', 'effective_tangent', 'macro_work']

VOIGT_PAIRS = {
    3: ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)),
    2: ((0, 0), (1, 1), (0, 1)),
}


@dataclass(frozen=True, eq=False)
class HomogenizedRecord:
    time: float
    F_bar: np.ndarray
    E_bar: np.ndarray
    P_bar: np.ndarray
    sigma_bar: np.ndarray
    # plane strain out-of-plane averages, None in 3D
    P33_bar: Optional[float] = None
    sigma33_bar: Optional[float] = None

    @property
    def H_bar(self):
        return self.F_bar - np.eye(len(self.F_bar))


@dataclass(frozen=True, eq=False)
class EffectiveTangent:
    """Homogenized small-strain stiffness in Voigt order (11,22,33,23,13,12)."""
    C_eff: np.ndarray
    probe_magnitude: float
    bc_kind: BCKind = BCKind.PDBC


def _weights(mesh, wdetJ=None):
    if wdetJ is None:
        _, _, wdetJ = _elements.reference_geometry(mesh.coords, mesh.conn)
    return wdetJ


def average_stress(mesh, qp_states, wdetJ=None):
    """Volume-averaged PK1 and Cauchy stress.

    Returns
    -------
    P_bar, sigma_bar : ndarray (d, d)
    """
    w = _weights(mesh, wdetJ)
    P_bar = np.einsum('eqij,eq->ij', qp_states.P, w) / w.sum()
    J = np.linalg.det(qp_states.F)
    wJ = w * J
    sigma_bar = np.einsum('eqij,eq->ij', qp_states.sigma, wJ) / wJ.sum()
    return P_bar, sigma_bar


def _out_of_plane(mesh, qp_states, wdetJ=None):
    if qp_states.P33 is None:
        return None, None
    w = _weights(mesh, wdetJ)
    wJ = w * np.linalg.det(qp_states.F)
    return (float(np.sum(qp_states.P33 * w) / w.sum()),
            float(np.sum(qp_states.sigma33 * wJ) / wJ.sum()))


def average_gradient(mesh, field_state, wdetJ=None, dNdX=None):
    """Volume average of the displacement gradient from nodal displacements."""
    if dNdX is None or wdetJ is None:
        dNdX, _, wdetJ = _elements.reference_geometry(mesh.coords, mesh.conn)
    ue = np.asarray(field_state.w_total)[mesh.conn]
    grad = np.einsum('eai,eqaJ->eqiJ', ue, dNdX)
    return np.einsum('eqij,eq->ij', grad, wdetJ) / wdetJ.sum()


def make_record(time, H_bar, P_bar, sigma_bar, P33_bar=None, sigma33_bar=None):
    H_bar = np.asarray(H_bar, dtype=float)
    F = H_bar + np.eye(len(H_bar))
    E = 0.5 * (F.T @ F - np.eye(len(F)))
    return HomogenizedRecord(float(time), F, E, np.asarray(P_bar, float),
                             np.asarray(sigma_bar, float), P33_bar, sigma33_bar)


def record_from_state(problem, state):
    mesh = problem.mesh
    P_bar, sigma_bar = average_stress(mesh, state.qp_states, problem.wdetJ)
    H_bar = average_gradient(mesh, state, problem.wdetJ, problem.dNdX)
    P33, s33 = _out_of_plane(mesh, state.qp_states, problem.wdetJ)
    return make_record(state.time, H_bar, P_bar, sigma_bar, P33, s33)


def voigt(tensor, pairs):
    return np.array([tensor[i, j] for i, j in pairs])


def probe_gradient(dim, column, probe):
    """Symmetric H for a unit Voigt strain probe (engineering shear)."""
    i, j = VOIGT_PAIRS[dim][column]
    H = np.zeros((dim, dim))
    if i == j:
        H[i, i] = probe
    else:
        H[i, j] = H[j, i] = 0.5 * probe
    return H


def effective_tangent(mesh, materials, bc_kind, probe=1e-6, controls=None,
                      columns=None, geom_tol=None):
    """Homogenized stiffness from small fully-prescribed strain probes.

    Column j of ``C_eff`` is the averaged Cauchy stress (Voigt order) for a
    unit engineering strain in Voigt direction j, scaled by ``probe``.

    Parameters
    ----------
    columns : sequence of int, optional
        Only run these probes; the remaining columns are left as NaN.
    geom_tol : float, optional
        Face-matching tolerance (default relative to the bounding box).
    """
    from .solver import SolveControls, run

    bc_kind = BCKind(bc_kind)
    d = mesh.dimension
    pairs = VOIGT_PAIRS[d]
    controls = controls or SolveControls(n_steps=1)
    pairings = pair_periodic_nodes(mesh, geom_tol) if bc_kind == BCKind.PDBC else None
    C = np.full((len(pairs), len(pairs)), np.nan)
    for col in (range(len(pairs)) if columns is None else columns):
        load = MacroLoad(probe_gradient(d, col, probe))
        cs = build_constraints(mesh, pairings, load, bc_kind, geom_tol)
        res = run(mesh, materials, cs, load, controls, keep_states=False, dt_out=load.end_time)
        C[:, col] = voigt(res.records[-1].sigma_bar, pairs) / probe
    return EffectiveTangent(C, probe, bc_kind)


def macro_work(records, volume=1.0):
    """Trapezoidal ``volume * integral P_bar : dF_bar`` along the record path."""
    W = 0.0
    for a, b in zip(records, records[1:]):
        W += 0.5 * np.sum((a.P_bar + b.P_bar) * (b.F_bar - a.F_bar))
    return volume * W
