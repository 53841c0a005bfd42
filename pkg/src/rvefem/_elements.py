"""Isoparametric quad4 / hex8 shape functions and full Gauss rules."""

import numpy as np

_G = 1.0 / np.sqrt(3.0)

# corner signs in the usual counter-clockwise / bottom-then-top ordering
QUAD4_CORNERS = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
HEX8_CORNERS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)

NODES_PER_ELEMENT = {2: 4, 3: 8}
VTK_CELL_TYPE = {2: 9, 3: 12}


def corners(dim):
    return QUAD4_CORNERS if dim == 2 else HEX8_CORNERS


def gauss_rule(dim):
    """2x2 (quad4) or 2x2x2 (hex8) Gauss points and weights."""
    pts = corners(dim) * _G
    return pts, np.ones(len(pts))


def shape_values(dim, xi):
    """Shape function values, shape (n_pts, n_nodes)."""
    xi = np.atleast_2d(xi)
    c = corners(dim)
    return np.prod(1.0 + xi[:, None, :] * c[None, :, :], axis=2) / 2.0**dim


def shape_gradients(dim, xi):
    """Derivatives dN/dxi, shape (n_pts, n_nodes, dim)."""
    xi = np.atleast_2d(xi)
    c = corners(dim)
    fac = 1.0 + xi[:, None, :] * c[None, :, :]
    out = np.empty((xi.shape[0], c.shape[0], dim))
    for k in range(dim):
        others = np.prod(np.delete(fac, k, axis=2), axis=2)
        out[:, :, k] = c[None, :, k] * others
    return out / 2.0**dim


def reference_geometry(coords, conn):
    """Per element, per Gauss point: dN/dX, det J and quadrature weight.

    Parameters
    ----------
    coords : ndarray, shape (n_nodes, d)
    conn : ndarray of int, shape (n_elem, n_en)
        Zero-based node indices.

    Returns
    -------
    dNdX : ndarray, shape (n_elem, n_qp, n_en, d)
    detJ : ndarray, shape (n_elem, n_qp)
    wdetJ : ndarray, shape (n_elem, n_qp)
    """
    dim = coords.shape[1]
    pts, w = gauss_rule(dim)
    dNdxi = shape_gradients(dim, pts)              # (q, a, k)
    xe = coords[conn]                              # (e, a, i)
    J = np.einsum('eai,qak->eqik', xe, dNdxi)       # dX_i/dxi_k
    detJ = np.linalg.det(J)
    Jinv = np.linalg.inv(J)
    dNdX = np.einsum('qak,eqki->eqai', dNdxi, Jinv)
    return dNdX, detJ, detJ * w[None, :]
