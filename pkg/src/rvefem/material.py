"""
Microscopic constitutive models.

Both models are hyperelastic and are evaluated through the same interface:
given deformation gradients ``F`` (any leading batch shape, trailing
``(d, d)``) they return the first Piola-Kirchhoff stress ``P = dW/dF``, the
Cauchy stress and the material tangent ``A = d2W/dFdF`` stored as a
``(d, d, d, d)`` array with ``A[..., i, J, k, L] = dP_iJ / dF_kL``.

2D evaluations are plane strain: ``F`` is embedded in 3x3 with ``F_33 = 1``
and the in-plane blocks of ``P`` and ``A`` are returned.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ['LinearElastic', 'MooneyRivlin', 'PointState', 'InvertedElement',
           'evaluate', 'strain_energy', 'tangent_check']


class InvertedElement(ArithmeticError):
    """det F <= 0 at a quadrature point."""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(message)


@dataclass(frozen=True)
class LinearElastic:
    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("Young's modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")

    @property
    def lame(self):
        lam = self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))
        mu = self.E / (2 * (1 + self.nu))
        return lam, mu


@dataclass(frozen=True)
class MooneyRivlin:
    """W = C10 (I1bar - 3) + C01 (I2bar - 3) + K/2 (J - 1)^2."""
    C10: float
    C01: float
    K: float

    def __post_init__(self):
        if self.C10 < 0 or self.C01 < 0 or not self.C10 + self.C01 > 0:
            raise ValueError("need C10 >= 0, C01 >= 0 and C10 + C01 > 0")
        if not self.K > 0:
            raise ValueError("bulk modulus must be positive")


@dataclass(frozen=True, eq=False)
class PointState:
    F: np.ndarray
    P: np.ndarray
    sigma: np.ndarray
    A: np.ndarray
    # out-of-plane components for plane strain (None in 3D)
    P33: Optional[np.ndarray] = None
    sigma33: Optional[np.ndarray] = None


_I3 = np.eye(3)


def _embed(F):
    d = F.shape[-1]
    if d == 3:
        return F
    F3 = np.zeros(F.shape[:-2] + (3, 3))
    F3[..., :2, :2] = F
    F3[..., 2, 2] = 1.0
    return F3


def _linear(model, F):
    lam, mu = model.lame
    eps = 0.5 * (F + np.swapaxes(F, -1, -2)) - _I3
    tr = np.trace(eps, axis1=-2, axis2=-1)[..., None, None]
    P = lam * tr * _I3 + 2 * mu * eps
    A = (lam * np.einsum('ij,kl->ijkl', _I3, _I3)
         + mu * (np.einsum('ik,jl->ijkl', _I3, _I3) + np.einsum('il,jk->ijkl', _I3, _I3)))
    A = np.broadcast_to(A, F.shape[:-2] + (3, 3, 3, 3))
    W = 0.5 * lam * tr[..., 0, 0]**2 + mu * np.einsum('...ij,...ij->...', eps, eps)
    # small-strain model: Cauchy stress is the (symmetric) linear stress
    return W, P, P.copy(), A


def _mooney_rivlin(model, F, want_tangent=True):
    c10, c01, K = model.C10, model.C01, model.K
    J = np.linalg.det(F)
    G = np.swapaxes(np.linalg.inv(F), -1, -2)            # F^-T
    C = np.einsum('...ki,...kj->...ij', F, F)
    B = np.einsum('...ik,...jk->...ij', F, F)
    I1 = np.trace(C, axis1=-2, axis2=-1)
    I2 = 0.5 * (I1**2 - np.einsum('...ij,...ji->...', C, C))
    j23 = J**(-2.0 / 3.0)
    j43 = J**(-4.0 / 3.0)
    FC = np.einsum('...ik,...kj->...ij', F, C)
    D = 2.0 * (I1[..., None, None] * F - FC)             # dI2/dF

    x = lambda a: a[..., None, None]
    P = (c10 * x(j23) * (2 * F - (2.0 / 3.0) * x(I1) * G)
         + c01 * x(j43) * (D - (4.0 / 3.0) * x(I2) * G)
         + K * x((J - 1.0) * J) * G)
    W = c10 * (j23 * I1 - 3) + c01 * (j43 * I2 - 3) + 0.5 * K * (J - 1.0)**2
    sigma = np.einsum('...ik,...jk->...ij', P, F) / x(J)
    if not want_tangent:
        return W, P, sigma, None

    y = lambda a: a[..., None, None, None, None]
    outer = lambda a, b: np.einsum('...ij,...kl->...ijkl', a, b)
    GG = np.einsum('...il,...kj->...ijkl', G, G)          # G_il G_kj
    dd = np.einsum('ik,jl->ijkl', _I3, _I3)

    A1 = (-(2.0 / 3.0) * outer(2 * F - (2.0 / 3.0) * x(I1) * G, G)
          + 2 * dd
          - (4.0 / 3.0) * outer(G, F)
          + (2.0 / 3.0) * y(I1) * GG)
    dD = 2.0 * (2 * outer(F, F) + y(I1) * dd
                - np.einsum('ik,...lj->...ijkl', _I3, C)
                - np.einsum('...il,...kj->...ijkl', F, F)
                - np.einsum('...ik,jl->...ijkl', B, _I3))
    A2 = (-(4.0 / 3.0) * outer(D - (4.0 / 3.0) * x(I2) * G, G)
          + dD
          - (4.0 / 3.0) * outer(G, D)
          + (4.0 / 3.0) * y(I2) * GG)
    A3 = y((2 * J - 1.0) * J) * outer(G, G) - y((J - 1.0) * J) * GG
    A = c10 * y(j23) * A1 + c01 * y(j43) * A2 + K * A3
    return W, P, sigma, A


def _dispatch(model, F3, want_tangent=True):
    if isinstance(model, LinearElastic):
        return _linear(model, F3)
    if isinstance(model, MooneyRivlin):
        return _mooney_rivlin(model, F3, want_tangent)
    raise TypeError(f"unsupported material {model!r}")


def _check_det(F, location):
    detF = np.linalg.det(F)
    bad = ~(detF > 0)
    if np.any(bad):
        first = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        loc = location if location is not None else first
        raise InvertedElement(f"det F = {np.asarray(detF)[first]:.3e} <= 0 at {loc}",
                              location=loc)


def evaluate(model, F, location=None):
    """Stress and consistent tangent at one or many material points.

    Parameters
    ----------
    model : LinearElastic or MooneyRivlin
    F : array_like, shape (..., d, d)
        Deformation gradients, d = 2 (plane strain) or 3.
    location : optional
        Tag attached to :class:`InvertedElement` if ``det F <= 0``.

    Returns
    -------
    PointState
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    _check_det(F, location)
    _, P, sigma, A = _dispatch(model, _embed(F))
    if d == 3:
        return PointState(F, P, sigma, A)
    return PointState(F, P[..., :2, :2], sigma[..., :2, :2], A[..., :2, :2, :2, :2],
                      P33=P[..., 2, 2], sigma33=sigma[..., 2, 2])


def strain_energy(model, F):
    """Strain energy density W(F) per unit reference volume."""
    F = np.asarray(F, dtype=float)
    _check_det(F, None)
    W, _, _, _ = _dispatch(model, _embed(F), want_tangent=False)
    return W


def tangent_check(model, F, h=1e-6):
    """Max deviation of the analytic tangent from central differences of P.

    Returns ``max |A - A_fd| / max(1, max|A|)`` for a single ``F``.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    A = evaluate(model, F).A
    A_fd = np.empty_like(A)
    for k in range(d):
        for l in range(d):
            dF = np.zeros((d, d))
            dF[k, l] = h
            Pp = evaluate(model, F + dF).P
            Pm = evaluate(model, F - dF).P
            A_fd[..., k, l] = (Pp - Pm) / (2 * h)
    return float(np.max(np.abs(A - A_fd)) / max(1.0, np.max(np.abs(A))))
