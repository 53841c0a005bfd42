"""
Reduced unknown systems for linear (LDBC) and periodic (PDBC) displacement
boundary conditions.

The microscopic displacement is split as ``w(X) = H @ X + w_fluct(X)``. LDBC
pins the fluctuation to zero on the whole boundary; PDBC makes it periodic by
eliminating every boundary node onto the canonical master of its periodic
equivalence class. Either way the boundary relations hold exactly by
construction and the reduced stiffness stays symmetric positive definite.

Free entries of the macroscopic displacement gradient become extra unknowns,
appended after the fluctuation unknowns.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import boundary_mask, default_geom_tol

__all__ = ['BCKind', 'MacroLoad', 'ConstraintSystem', 'ConstraintError',
           'DofKind', 'split_displacement', 'chain_corner_masters',
           'build_constraints']


class ConstraintError(ValueError):
    pass


class BCKind(enum.IntEnum):
    # integer values follow the deck's ``bc`` flag
    PDBC = 0
    LDBC = 1


class DofKind(enum.IntEnum):
    UNKNOWN = 0
    ELIMINATED = 1
    FIXED = 2


@dataclass(frozen=True, eq=False)
class MacroLoad:
    """Macroscopic displacement gradient targets.

    ``targets`` is a d x d array; ``nan`` marks a Free component, any finite
    value a Prescribed one. Prescribed entries are scaled by the load curve
    ``lcid`` over ``[0, end_time]``.
    """
    targets: np.ndarray
    lcid: int = 1
    end_time: float = 1.0

    def __post_init__(self):
        t = np.array(self.targets, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] not in (2, 3):
            raise ConstraintError("H targets must be a 2x2 or 3x3 array")
        if np.any(np.isinf(t)):
            raise ConstraintError("H targets must be finite")
        if np.all(np.isnan(t)):
            raise ConstraintError("at least one H component must be prescribed")
        t.flags.writeable = False
        object.__setattr__(self, 'targets', t)

    @classmethod
    def from_components(cls, dim, prescribed, **kw):
        """``prescribed`` maps zero-based ``(i, j)`` to a target value."""
        t = np.full((dim, dim), np.nan)
        for (i, j), v in prescribed.items():
            t[i, j] = v
        return cls(t, **kw)

    @property
    def dim(self):
        return self.targets.shape[0]

    @property
    def prescribed(self):
        return ~np.isnan(self.targets)

    def H_prescribed(self, factor=1.0):
        """Prescribed part of H at load factor ``factor`` (free entries zero)."""
        return np.where(self.prescribed, self.targets * factor, 0.0)

    def __eq__(self, other):
        if not isinstance(other, MacroLoad):
            return NotImplemented
        return (np.array_equal(self.targets, other.targets, equal_nan=True)
                and self.lcid == other.lcid and self.end_time == other.end_time)


def split_displacement(H, X):
    """Affine part ``H @ X`` of the microscopic displacement.

    ``X`` may be a single point or an ``(n, d)`` array of points.
    """
    H = np.asarray(H, dtype=float)
    X = np.asarray(X, dtype=float)
    return X @ H.T


@dataclass(frozen=True, eq=False)
class CanonicalMasters:
    """Periodic equivalence classes of boundary nodes.

    ``master[a]`` is the row of the canonical (lowest-id) member of node a's
    class; ``shift[a] = X[a] - X[master[a]]`` is a sum of +/- face spans, so
    periodicity of the total displacement reads
    ``w[a] - w[master[a]] = H @ shift[a]``.
    """
    master: np.ndarray
    shift: np.ndarray

    def offsets(self, H):
        return split_displacement(H, self.shift)

    def classes(self):
        out = {}
        for a, m in enumerate(self.master):
            out.setdefault(int(m), []).append(a)
        return out


def chain_corner_masters(mesh, pairings, geom_tol=None):
    """Resolve face pairings into one canonical master per boundary node.

    Edge and corner nodes appear in several pairings; union-find merges them
    into a single class so the periodic relations stay consistent.
    """
    n = mesh.n_nodes
    parent = np.arange(n)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for pairing in pairings:
        for plus_id, minus_id in pairing.pairs:
            ra = find(mesh.node_index(int(plus_id)))
            rb = find(mesh.node_index(int(minus_id)))
            if ra != rb:
                # root is always the lower row == lower id (node_ids sorted)
                lo, hi = min(ra, rb), max(ra, rb)
                parent[hi] = lo
    master = np.array([find(a) for a in range(n)])
    shift = mesh.coords - mesh.coords[master]

    tol = default_geom_tol(mesh) if geom_tol is None else geom_tol
    spans = mesh.spans
    ok = (np.abs(shift) <= tol) | (np.abs(np.abs(shift) - spans) <= tol)
    if not ok.all():
        a = int(np.argwhere(~ok.all(axis=1))[0, 0])
        raise ConstraintError(f"inconsistent periodic chain at node {mesh.node_ids[a]}")
    # snap to exact multiples of the spans
    shift = np.where(np.abs(shift) <= tol, 0.0, np.sign(shift) * spans)
    return CanonicalMasters(master, shift)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    bc_kind: BCKind
    dim: int
    dof_kind: np.ndarray         # (n_nodes, d) DofKind
    dof_index: np.ndarray        # (n_nodes, d) reduced index, -1 if fixed
    n_fluct: int
    macro_unknowns: list         # [((i, j), unknown index), ...]
    load: MacroLoad
    coords: np.ndarray
    masters: CanonicalMasters = None
    _T: sp.csr_matrix = field(default=None, repr=False)

    @property
    def n_macro(self):
        return len({k for _, k in self.macro_unknowns})

    @property
    def n_unknowns(self):
        return self.n_fluct + self.n_macro

    def macro_basis(self):
        """One d x d direction per macro unknown, in unknown order."""
        out = [np.zeros((self.dim, self.dim)) for _ in range(self.n_macro)]
        for (i, j), k in self.macro_unknowns:
            out[k - self.n_fluct][i, j] = 1.0
        return out

    def H_from(self, z, factor):
        """Current macro displacement gradient for reduced vector ``z``."""
        H = self.load.H_prescribed(factor)
        for (i, j), k in self.macro_unknowns:
            H[i, j] = z[k]
        return H

    @property
    def T(self):
        """Sparse map from reduced unknowns to full nodal dofs.

        Full displacement = ``T @ z + affine(H_prescribed)``.
        """
        if self._T is None:
            object.__setattr__(self, '_T', self._build_T())
        return self._T

    def _build_T(self):
        n_full = self.dof_index.size
        rows = np.flatnonzero(self.dof_index.ravel() >= 0)
        cols = self.dof_index.ravel()[rows]
        data = np.ones(len(rows))
        for m, E in enumerate(self.macro_basis()):
            col = split_displacement(E, self.coords).ravel()
            nz = np.flatnonzero(col)
            rows = np.concatenate([rows, nz])
            cols = np.concatenate([cols, np.full(len(nz), self.n_fluct + m)])
            data = np.concatenate([data, col[nz]])
        return sp.csr_matrix((data, (rows, cols)), shape=(n_full, self.n_unknowns))

    def displacement(self, z, factor):
        """Full nodal displacement ``(n_nodes, d)`` and the current H."""
        H = self.H_from(z, factor)
        fl = np.zeros(self.dof_index.size)
        idx = self.dof_index.ravel()
        m = idx >= 0
        fl[m] = z[idx[m]]
        return split_displacement(H, self.coords) + fl.reshape(-1, self.dim), H

    def counts(self):
        return {kind.name: int(np.sum(self.dof_kind == kind)) for kind in DofKind}


def _macro_unknowns(load, start):
    free = ~load.prescribed
    d = load.dim
    out = []
    assigned = {}
    k = start
    for i in range(d):
        for j in range(d):
            if not free[i, j]:
                continue
            if i != j and free[j, i] and (j, i) in assigned:
                # both partners free: tie them to suppress the spin mode
                out.append(((i, j), assigned[(j, i)]))
                continue
            assigned[(i, j)] = k
            out.append(((i, j), k))
            k += 1
    return out


def build_constraints(mesh, pairings, load, bc_kind, geom_tol=None):
    """Classify every nodal dof and number the reduced unknowns.

    Parameters
    ----------
    mesh : Mesh
    pairings : list of FacePairing
        Required for PDBC, ignored for LDBC.
    load : MacroLoad
    bc_kind : BCKind
    """
    bc_kind = BCKind(bc_kind)
    d = mesh.dimension
    if load.dim != d:
        raise ConstraintError(f"H is {load.dim}x{load.dim} but the mesh is {d}D")
    n = mesh.n_nodes
    kind = np.full((n, d), DofKind.UNKNOWN, dtype=np.int8)
    masters = None

    if bc_kind == BCKind.LDBC:
        kind[boundary_mask(mesh, geom_tol)] = DofKind.FIXED
        owner = np.arange(n)
    else:
        if pairings is None or len(pairings) != d:
            raise ConstraintError("PDBC needs one face pairing per axis")
        masters = chain_corner_masters(mesh, pairings, geom_tol)
        owner = masters.master
        kind[owner != np.arange(n)] = DofKind.ELIMINATED
        corner = np.all(np.isclose(mesh.coords, mesh.bbox_min) |
                        np.isclose(mesh.coords, mesh.bbox_max), axis=1)
        fixed = int(np.flatnonzero(corner).min())
        kind[owner[fixed]] = DofKind.FIXED

    index = np.full((n, d), -1, dtype=np.int64)
    unknown = kind == DofKind.UNKNOWN
    index[unknown] = np.arange(int(unknown.sum()))
    n_fluct = int(unknown.sum())
    # eliminated dofs share their master's index (-1 if the master is fixed)
    elim = kind == DofKind.ELIMINATED
    index[elim] = index[owner][elim]

    macro = _macro_unknowns(load, n_fluct)
    return ConstraintSystem(bc_kind=bc_kind, dim=d, dof_kind=kind, dof_index=index,
                            n_fluct=n_fluct, macro_unknowns=macro, load=load,
                            coords=np.array(mesh.coords), masters=masters)
