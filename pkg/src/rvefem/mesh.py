"""
Mesh representation, voxel/laminate microstructure generators and periodic
node pairing for PDBC-matching meshes.

Meshes are axis-aligned boxes tiled by quad4 (2D, plane strain) or hex8 (3D)
elements. Node and element ids are the user-facing 1-based labels from the
keyword deck; internally connectivity is stored as zero-based row indices
into ``coords``.
"""

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _elements

__all__ = [
    'Node', 'Element', 'Mesh', 'FacePairing',
    'MeshError', 'MatchFailure',
    'load_mesh', 'generate_voxel_sphere', 'generate_laminate_2d',
    'pair_periodic_nodes', 'default_geom_tol',
]

TILING_RTOL = 1e-8


class MeshError(ValueError):
    pass


class MatchFailure(MeshError):
    """Raised when a mesh is not PDBC-matching."""

    def __init__(self, node_id, axis, message=None):
        self.node_id = node_id
        self.axis = axis
        super().__init__(message or
                         f"node {node_id} on face +/-{axis + 1} has no periodic partner")


class Node(NamedTuple):
    id: int
    X: Sequence[float]


class Element(NamedTuple):
    id: int
    part_id: int
    connectivity: Sequence[int]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    dimension: int
    node_ids: np.ndarray       # (n_nodes,)
    coords: np.ndarray         # (n_nodes, d)
    element_ids: np.ndarray    # (n_elem,)
    part_ids: np.ndarray       # (n_elem,)
    conn: np.ndarray           # (n_elem, n_en), zero-based indices into coords
    bbox_min: np.ndarray
    bbox_max: np.ndarray

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_elements(self):
        return len(self.element_ids)

    @property
    def spans(self):
        return self.bbox_max - self.bbox_min

    @property
    def element_volumes(self):
        _, _, wdetJ = _elements.reference_geometry(self.coords, self.conn)
        return wdetJ.sum(axis=1)

    @property
    def volume(self):
        return float(self.element_volumes.sum())

    def node_index(self, node_id):
        idx = np.searchsorted(self.node_ids, node_id)
        if idx >= len(self.node_ids) or self.node_ids[idx] != node_id:
            raise KeyError(node_id)
        return int(idx)

    def connectivity_ids(self):
        """Connectivity expressed in node ids rather than row indices."""
        return self.node_ids[self.conn]

    def parts(self):
        return sorted(set(int(p) for p in self.part_ids))


def default_geom_tol(mesh):
    return 1e-8 * float(np.linalg.norm(mesh.spans))


def _min_jacobians(coords, conn):
    dim = coords.shape[1]
    pts, _ = _elements.gauss_rule(dim)
    dNdxi = _elements.shape_gradients(dim, pts)
    J = np.einsum('eai,qak->eqik', coords[conn], dNdxi)
    return np.linalg.det(J)


def load_mesh(nodes, elements, dimension=None):
    """Build a validated :class:`Mesh` from parsed node and element records.

    Parameters
    ----------
    nodes : iterable of (id, coordinates)
        Coordinates may carry a trailing zero z-value for 2D meshes.
    elements : iterable of (id, part_id, node ids)
        4 node ids (quad4) or 8 node ids (hex8).
    dimension : int, optional
        Spatial dimension. Inferred from the element node count if omitted.

    Raises
    ------
    MeshError
        Duplicate node ids, dangling connectivity, non-positive Jacobian at a
        Gauss point, or element volumes that do not tile the bounding box.
    """
    nodes = list(nodes)
    elements = list(elements)
    if not nodes or not elements:
        raise MeshError("mesh needs at least one node and one element")

    n_en = {len(e[2]) for e in elements}
    if len(n_en) != 1 or n_en.pop() not in (4, 8):
        raise MeshError("elements must be all quad4 (4 nodes) or all hex8 (8 nodes)")
    inferred = 2 if len(elements[0][2]) == 4 else 3
    if dimension is None:
        dimension = inferred
    elif dimension != inferred:
        raise MeshError(f"dimension {dimension} inconsistent with "
                        f"{len(elements[0][2])}-node elements")

    ids = np.array([int(n[0]) for n in nodes], dtype=np.int64)
    if np.any(ids <= 0):
        raise MeshError("node ids must be positive")
    order = np.argsort(ids, kind='stable')
    sorted_ids = ids[order]
    dup = np.flatnonzero(np.diff(sorted_ids) == 0)
    if dup.size:
        raise MeshError(f"duplicate node id {sorted_ids[dup[0]]}")

    coords = np.zeros((len(nodes), dimension))
    for row, k in enumerate(order):
        X = [float(v) for v in nodes[k][1]]
        if len(X) < dimension or any(abs(v) > 0 for v in X[dimension:]):
            raise MeshError(f"node {sorted_ids[row]}: expected {dimension} coordinates")
        coords[row] = X[:dimension]

    eids = np.array([int(e[0]) for e in elements], dtype=np.int64)
    if len(set(eids.tolist())) != len(eids):
        raise MeshError("duplicate element id")
    parts = np.array([int(e[1]) for e in elements], dtype=np.int64)
    if np.any(parts <= 0):
        raise MeshError("part ids must be positive")
    conn_ids = np.array([[int(v) for v in e[2]] for e in elements], dtype=np.int64)
    pos = np.searchsorted(sorted_ids, conn_ids)
    pos = np.clip(pos, 0, len(sorted_ids) - 1)
    bad = sorted_ids[pos] != conn_ids
    if bad.any():
        e, a = np.argwhere(bad)[0]
        raise MeshError(f"element {eids[e]} references missing node {conn_ids[e, a]}")

    detJ = _min_jacobians(coords, pos)
    if np.any(detJ <= 0):
        e = int(np.argwhere(detJ <= 0)[0, 0])
        raise MeshError(f"element {eids[e]} has non-positive Jacobian "
                        f"(min det J = {detJ[e].min():.3e})")

    bbox_min = coords.min(axis=0)
    bbox_max = coords.max(axis=0)
    mesh = Mesh(dimension=dimension,
                node_ids=_frozen(sorted_ids, np.int64),
                coords=_frozen(coords, float),
                element_ids=_frozen(eids, np.int64),
                part_ids=_frozen(parts, np.int64),
                conn=_frozen(pos, np.int64),
                bbox_min=_frozen(bbox_min, float),
                bbox_max=_frozen(bbox_max, float))
    box = float(np.prod(mesh.spans))
    vol = mesh.volume
    if box <= 0 or abs(vol - box) > TILING_RTOL * box:
        raise MeshError(f"element volumes ({vol:.12g}) do not tile the bounding "
                        f"box ({box:.12g})")
    return mesh


def _structured_grid(shape, spans):
    """Nodes and x-fastest connectivity for a structured box grid."""
    dim = len(shape)
    axes = [np.linspace(0.0, L, n + 1) for n, L in zip(shape, spans)]
    grid = np.meshgrid(*axes, indexing='ij')
    # x fastest: flatten in Fortran order
    coords = np.stack([g.ravel(order='F') for g in grid], axis=1)
    npts = [n + 1 for n in shape]

    def nid(idx):
        flat = idx[0]
        stride = 1
        for k in range(1, dim):
            stride *= npts[k - 1]
            flat = flat + stride * idx[k]
        return flat

    cell = np.meshgrid(*[np.arange(n) for n in shape], indexing='ij')
    cell = [c.ravel(order='F') for c in cell]
    offsets = _elements.corners(dim) > 0
    conn = np.stack([nid([cell[k] + int(off[k]) for k in range(dim)])
                     for off in offsets], axis=1)
    centroids = np.stack([(c + 0.5) * L / n for c, n, L in zip(cell, shape, spans)],
                         axis=1)
    return coords, conn, centroids


def _from_grid(coords, conn, parts):
    nodes = [Node(i + 1, X) for i, X in enumerate(coords)]
    elements = [Element(e + 1, int(p), (c + 1).tolist())
                for e, (c, p) in enumerate(zip(conn, parts))]
    return load_mesh(nodes, elements)


def generate_voxel_sphere(n_per_side, radius_fraction, part_ids=(1, 2), n_cells=1):
    """Unit-cell voxel mesh with a centred spherical inclusion.

    A voxel belongs to the inclusion iff its centroid lies inside the sphere
    of radius ``radius_fraction`` (relative to the cell edge) centred in its
    unit cell.

    Parameters
    ----------
    n_per_side : int
        Voxels per unit-cell edge.
    radius_fraction : float
        In (0, 0.5).
    part_ids : (int, int)
        Part ids of (matrix, inclusion).
    n_cells : int
        Number of unit cells per box edge. ``n_cells > 1`` builds a periodic
        array of identical inclusions in a box of edge ``n_cells``.
    """
    if int(n_per_side) != n_per_side or n_per_side < 1:
        raise MeshError("n_per_side must be an integer >= 1")
    if not 0.0 < radius_fraction < 0.5:
        raise MeshError("radius_fraction must lie in (0, 0.5)")
    if int(n_cells) != n_cells or n_cells < 1:
        raise MeshError("n_cells must be an integer >= 1")
    n = int(n_per_side) * int(n_cells)
    coords, conn, centroids = _structured_grid((n, n, n), (float(n_cells),) * 3)
    local = np.mod(centroids, 1.0) - 0.5
    inside = np.einsum('ij,ij->i', local, local) < radius_fraction**2
    parts = np.where(inside, part_ids[1], part_ids[0])
    return _from_grid(coords, conn, parts)


def generate_laminate_2d(n_x, n_y, phase1_fraction, part_ids=(1, 2)):
    """Unit-square quad4 laminate: layers normal to x.

    Element columns with x-index below ``phase1_fraction * n_x`` get
    ``part_ids[0]``, the rest ``part_ids[1]``.
    """
    if n_x < 2 or n_y < 2:
        raise MeshError("n_x and n_y must be >= 2")
    if not 0.0 < phase1_fraction < 1.0:
        raise MeshError("phase1_fraction must lie in (0, 1)")
    n1 = phase1_fraction * n_x
    if abs(n1 - round(n1)) > 1e-9:
        raise MeshError(f"phase1_fraction {phase1_fraction} is not resolvable "
                        f"with n_x = {n_x}")
    coords, conn, centroids = _structured_grid((int(n_x), int(n_y)), (1.0, 1.0))
    col = np.floor(centroids[:, 0] * n_x).astype(int)
    parts = np.where(col < round(n1), part_ids[0], part_ids[1])
    return _from_grid(coords, conn, parts)


@dataclass(frozen=True, eq=False)
class FacePairing:
    """Node pairs across the opposite faces normal to ``axis`` (0-based).

    ``pairs[:, 0]`` are node ids on the plus face, ``pairs[:, 1]`` their
    partners on the minus face.
    """
    axis: int
    pairs: np.ndarray
    span: float

    def reversed(self):
        return FacePairing(self.axis, self.pairs[:, ::-1].copy(), -self.span)


def face_nodes(mesh, axis, side, geom_tol=None):
    """Row indices of nodes on face ``side`` (+1 or -1) normal to ``axis``."""
    tol = default_geom_tol(mesh) if geom_tol is None else geom_tol
    target = mesh.bbox_max[axis] if side > 0 else mesh.bbox_min[axis]
    return np.flatnonzero(np.abs(mesh.coords[:, axis] - target) <= tol)


def boundary_mask(mesh, geom_tol=None):
    mask = np.zeros(mesh.n_nodes, dtype=bool)
    for axis in range(mesh.dimension):
        for side in (1, -1):
            mask[face_nodes(mesh, axis, side, geom_tol)] = True
    return mask


def pair_periodic_nodes(mesh, geom_tol=None):
    """Match every plus-face node to its minus-face partner, per axis.

    Raises
    ------
    MatchFailure
        For the first (lowest-id) node without a unique partner.
    """
    tol = default_geom_tol(mesh) if geom_tol is None else float(geom_tol)
    if tol <= 0:
        raise ValueError("geom_tol must be positive")
    out = []
    for axis in range(mesh.dimension):
        plus = face_nodes(mesh, axis, 1, tol)
        minus = face_nodes(mesh, axis, -1, tol)
        keep = [k for k in range(mesh.dimension) if k != axis]
        tree = cKDTree(mesh.coords[minus][:, keep])
        dist, j = tree.query(mesh.coords[plus][:, keep], p=np.inf,
                             distance_upper_bound=tol)
        unmatched = ~np.isfinite(dist)
        if unmatched.any():
            raise MatchFailure(int(mesh.node_ids[plus[unmatched]].min()), axis)
        partner = minus[j]
        if len(np.unique(partner)) != len(partner) or len(minus) != len(plus):
            used = np.zeros(mesh.n_nodes, dtype=bool)
            used[partner] = True
            lonely = minus[~used[minus]]
            bad = lonely if lonely.size else plus
            raise MatchFailure(int(mesh.node_ids[bad].min()), axis)
        span = float(mesh.spans[axis])
        pairs = np.stack([mesh.node_ids[plus], mesh.node_ids[partner]], axis=1)
        pairs = pairs[np.argsort(pairs[:, 0], kind='stable')]
        out.append(FacePairing(axis, _frozen(pairs, np.int64), span))
    return out
