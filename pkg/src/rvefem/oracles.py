"""
Independent reference computations used to check the solver.

Nothing here imports from the solution path (mesh, material, constraints,
solver, homogenize): shape functions, elastic matrices and the Mooney-Rivlin
energy are rewritten from scratch in a different form (Voigt B-matrices,
principal stretches), so agreement is meaningful.
"""

from dataclasses import dataclass
import itertools

import numpy as np

__all__ = ['BoundResult', 'laminate_bounds', 'uniaxial_mr', 'mr_principal_stress',
           'isotropic_stiffness', 'dense_patch_solve', 'dense_single_element_solve',
           'fd_jacobian', 'periodic_classes', 'voxel_inclusion_fraction']


@dataclass(frozen=True)
class BoundResult:
    voigt: float
    reuss: float
    E1: float
    E2: float
    f1: float


def laminate_bounds(E1, E2, f1):
    """Parallel (Voigt) and series (Reuss) moduli of a two-phase laminate."""
    if E1 <= 0 or E2 <= 0 or not 0 < f1 < 1:
        raise ValueError("need E1, E2 > 0 and 0 < f1 < 1")
    voigt = f1 * E1 + (1 - f1) * E2
    reuss = 1.0 / (f1 / E1 + (1 - f1) / E2)
    return BoundResult(voigt, reuss, E1, E2, f1)


def isotropic_stiffness(E, nu, dim=3):
    """Voigt stiffness (11,22,33,23,13,12 / plane strain 11,22,12)."""
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    n = 3 if dim == 3 else 2
    C = np.zeros((2 * n, 2 * n)) if dim == 3 else np.zeros((3, 3))
    C[:n, :n] = lam
    C[range(n), range(n)] = lam + 2 * mu
    if dim == 3:
        C[3:, 3:] = mu * np.eye(3)
    else:
        C[2, 2] = mu
    return C


# ---------------------------------------------------------------------------
# Mooney-Rivlin in principal stretches


def mr_principal_stress(C10, C01, K, stretches):
    """dW/dlambda_i for W = C10(I1b-3) + C01(I2b-3) + K/2 (J-1)^2."""
    l = np.asarray(stretches, dtype=float)
    J = l.prod()
    I1 = np.sum(l**2)
    I2 = l[0]**2 * l[1]**2 + l[1]**2 * l[2]**2 + l[0]**2 * l[2]**2
    out = []
    for li in l:
        dI1 = 2 * li
        dI2 = 2 * li * (I1 - li**2)
        t1 = J**(-2 / 3) * (dI1 - 2 / 3 * I1 / li)
        t2 = J**(-4 / 3) * (dI2 - 4 / 3 * I2 / li)
        t3 = (J - 1) * J / li
        out.append(C10 * t1 + C01 * t2 + K * t3)
    return np.array(out)


def _root(g, lo, hi, tol=1e-12, maxit=200):
    """Bracketed Newton with bisection fallback."""
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise ValueError("root not bracketed")
    x = 0.5 * (lo + hi)
    for _ in range(maxit):
        gx = g(x)
        if abs(gx) <= tol:
            return x
        if np.sign(gx) == np.sign(glo):
            lo, glo = x, gx
        else:
            hi, ghi = x, gx
        h = 1e-7 * max(1.0, abs(x))
        dg = (g(x + h) - g(x - h)) / (2 * h)
        xn = x - gx / dg if dg != 0 else np.nan
        x = xn if lo < xn < hi else 0.5 * (lo + hi)
    return x


def uniaxial_mr(C10, C01, K, stretch, return_lateral=False):
    """P11 under uniaxial stretch with the lateral stress solved to zero."""
    if stretch <= 0:
        raise ValueError("stretch must be positive")
    if stretch == 1.0:
        return (0.0, 1.0) if return_lateral else 0.0
    g = lambda t: mr_principal_stress(C10, C01, K, (stretch, t, t))[1]
    t = _root(g, 1e-3, 1e3)
    P11 = mr_principal_stress(C10, C01, K, (stretch, t, t))[0]
    return (P11, t) if return_lateral else P11


# ---------------------------------------------------------------------------
# dense small-strain patch solver (B-matrix formulation)


def _lagrange(dim, xi):
    signs = np.array(list(itertools.product((-1, 1), repeat=dim)))[:, ::-1]
    # reorder tensor-product corners into counter-clockwise/bottom-top order
    order = [0, 1, 3, 2] if dim == 2 else [0, 1, 3, 2, 4, 5, 7, 6]
    signs = signs[order]
    N = np.array([np.prod([(1 + s[k] * xi[k]) / 2 for k in range(dim)]) for s in signs])
    dN = np.zeros((len(signs), dim))
    for a, s in enumerate(signs):
        for k in range(dim):
            dN[a, k] = s[k] / 2 * np.prod([(1 + s[m] * xi[m]) / 2
                                          for m in range(dim) if m != k])
    return N, dN


def _bmatrix(dNdX):
    n, dim = dNdX.shape
    if dim == 2:
        B = np.zeros((3, 2 * n))
        B[0, 0::2] = dNdX[:, 0]
        B[1, 1::2] = dNdX[:, 1]
        B[2, 0::2] = dNdX[:, 1]
        B[2, 1::2] = dNdX[:, 0]
        return B
    B = np.zeros((6, 3 * n))
    B[0, 0::3] = dNdX[:, 0]
    B[1, 1::3] = dNdX[:, 1]
    B[2, 2::3] = dNdX[:, 2]
    B[3, 1::3] = dNdX[:, 2]
    B[3, 2::3] = dNdX[:, 1]
    B[4, 0::3] = dNdX[:, 2]
    B[4, 2::3] = dNdX[:, 0]
    B[5, 0::3] = dNdX[:, 1]
    B[5, 1::3] = dNdX[:, 0]
    return B


def dense_stiffness(coords, conn, E, nu):
    """Dense global small-strain stiffness, dof order node-major."""
    coords = np.asarray(coords, float)
    dim = coords.shape[1]
    D = isotropic_stiffness(E, nu, dim)
    n = len(coords)
    K = np.zeros((n * dim, n * dim))
    g = 1 / np.sqrt(3)
    for el in conn:
        el = list(el)
        Xe = coords[el]
        Ke = np.zeros((len(el) * dim,) * 2)
        for xi in itertools.product((-g, g), repeat=dim):
            _, dN = _lagrange(dim, np.array(xi))
            J = Xe.T @ dN
            B = _bmatrix(dN @ np.linalg.inv(J))
            Ke += B.T @ D @ B * np.linalg.det(J)
        dofs = np.array([[a * dim + i for i in range(dim)] for a in el]).ravel()
        K[np.ix_(dofs, dofs)] += Ke
    return K


def dense_patch_solve(coords, conn, E, nu, H, boundary=None):
    """Linear-elastic LDBC solve with dense factorization.

    Boundary nodes (bounding-box faces unless ``boundary`` is given) get the
    affine displacement ``H @ X``; the rest are solved for.

    Returns
    -------
    u : ndarray (n_nodes, d)
    K : ndarray
        Dense stiffness restricted to the free dofs.
    """
    coords = np.asarray(coords, float)
    dim = coords.shape[1]
    H = np.asarray(H, float)
    if boundary is None:
        lo, hi = coords.min(0), coords.max(0)
        tol = 1e-9 * np.linalg.norm(hi - lo)
        boundary = np.any((np.abs(coords - lo) < tol) | (np.abs(coords - hi) < tol), axis=1)
    K = dense_stiffness(coords, conn, E, nu)
    fixed = np.repeat(np.asarray(boundary), dim)
    u = np.zeros(len(coords) * dim)
    u[fixed] = (coords @ H.T).ravel()[fixed]
    free = ~fixed
    Kff = K[np.ix_(free, free)]
    if free.any():
        rhs = -K[np.ix_(free, fixed)] @ u[fixed]
        u[free] = np.linalg.solve(Kff, rhs)
    return u.reshape(-1, dim), Kff


def dense_single_element_solve(E, nu, H, dim=3):
    """Unit square/cube single element under LDBC."""
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))[:, ::-1]
    order = [0, 1, 3, 2] if dim == 2 else [0, 1, 3, 2, 4, 5, 7, 6]
    coords = corners[order]
    u, _ = dense_patch_solve(coords, [list(range(len(coords)))], E, nu, H)
    return coords, u


# ---------------------------------------------------------------------------


def fd_jacobian(fun, z, h=1e-6):
    """Dense central-difference Jacobian of ``fun`` at ``z``."""
    z = np.asarray(z, float)
    f0 = np.asarray(fun(z))
    Jac = np.empty((f0.size, z.size))
    for k in range(z.size):
        dz = np.zeros_like(z)
        dz[k] = h
        Jac[:, k] = (np.asarray(fun(z + dz)) - np.asarray(fun(z - dz))) / (2 * h)
    return Jac


def periodic_classes(coords, lo, hi, tol=1e-9):
    """Group boundary nodes by their coordinates modulo the box spans.

    Returns a dict mapping the hashed key to the list of node rows.
    """
    coords = np.asarray(coords, float)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    span = hi - lo
    out = {}
    for a, X in enumerate(coords):
        on_bnd = np.any((np.abs(X - lo) < tol) | (np.abs(X - hi) < tol))
        if not on_bnd:
            continue
        r = np.mod(X - lo, span)
        r[np.abs(r - span) < tol] = 0.0
        key = tuple(np.round(r / tol).astype(np.int64))
        out.setdefault(key, []).append(a)
    return out


def voxel_inclusion_fraction(n, radius):
    """Fraction of voxel centroids inside the centred sphere, by loops."""
    inside = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                c = ((i + 0.5) / n - 0.5, (j + 0.5) / n - 0.5, (k + 0.5) / n - 0.5)
                if c[0]**2 + c[1]**2 + c[2]**2 < radius**2:
                    inside += 1
    return inside / n**3
