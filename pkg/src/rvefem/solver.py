"""
Implicit quasi-static solution of the microscale equilibrium problem.

The weak form is assembled over the reference configuration (total
Lagrangian) in reduced coordinates ``z = [fluctuation unknowns, free macro
gradient entries]``. The residual rows of a free macro entry are
``|Omega| * P_bar_ij``, so a converged state has zero average PK1 stress in
every free direction.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _elements
from .material import InvertedElement, PointState, evaluate, strain_energy

__all__ = ['LoadCurve', 'SolveControls', 'FieldState', 'RVEProblem', 'RunResult',
           'NonConvergence', 'LinearSolveError', 'assemble', 'solve_linear', 'run',
           'internal_energy']

log = logging.getLogger(__name__)

_CHUNK = 2048   # elements per tangent block, bounds peak memory


class NonConvergence(RuntimeError):
    """Newton failed after the allowed cutbacks. ``partial`` holds results so far."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class LoadCurve:
    points: tuple

    def __post_init__(self):
        pts = tuple((float(t), float(f)) for t, f in self.points)
        if len(pts) < 1:
            raise ValueError("load curve needs at least one point")
        times = [t for t, _ in pts]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("load curve times must be strictly increasing")
        if times[0] > 0:
            raise ValueError("load curve must start at or before t = 0")
        object.__setattr__(self, 'points', pts)

    def __call__(self, t):
        times, factors = zip(*self.points)
        return float(np.interp(t, times, factors))

    @classmethod
    def ramp(cls, end_time=1.0):
        return cls(((0.0, 0.0), (end_time, 1.0)))


@dataclass(frozen=True)
class SolveControls:
    n_steps: int = 10
    newton_rtol: float = 1e-6
    newton_atol: float = 1e-10
    max_newton_iters: int = 25
    divergence_cutback: float = 0.5
    max_cutbacks: int = 4

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not (self.newton_rtol > 0 and self.newton_atol > 0):
            raise ValueError("Newton tolerances must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if not 0 < self.divergence_cutback < 1:
            raise ValueError("divergence_cutback must lie in (0, 1)")


@dataclass(eq=False)
class FieldState:
    time: float
    z: np.ndarray
    w_total: np.ndarray          # (n_nodes, d)
    H_current: np.ndarray        # (d, d)
    qp_states: PointState        # arrays shaped (n_elem, n_qp, ...), tangent dropped
    energy: float = float('nan')


class RVEProblem:
    """Mesh + materials + constraints, with cached reference geometry."""

    def __init__(self, mesh, materials, constraints):
        missing = set(mesh.parts()) - set(materials)
        if missing:
            raise ValueError(f"no material for part(s) {sorted(missing)}")
        self.mesh = mesh
        self.materials = dict(materials)
        self.cs = constraints
        self.dim = d = mesh.dimension
        self.dNdX, self.detJ, self.wdetJ = _elements.reference_geometry(mesh.coords, mesh.conn)
        self.volume = float(self.wdetJ.sum())
        n_en = mesh.conn.shape[1]
        self.edofs = (mesh.conn[:, :, None] * d + np.arange(d)).reshape(len(mesh.conn), n_en * d)
        self.n_full = mesh.n_nodes * d
        self.T = constraints.T
        self.TT = self.T.T.tocsr()
        self._groups = [(part, np.flatnonzero(mesh.part_ids == part))
                        for part in mesh.parts()]

    # -- kinematics -------------------------------------------------------
    def displacement(self, z, factor):
        return self.cs.displacement(z, factor)

    def deformation_gradients(self, u):
        ue = u[self.mesh.conn]
        return np.eye(self.dim) + np.einsum('eai,eqaJ->eqiJ', ue, self.dNdX)

    # -- constitutive -----------------------------------------------------
    def point_states(self, F, with_tangent=True):
        ne, nq, d = F.shape[0], F.shape[1], self.dim
        P = np.empty_like(F)
        sig = np.empty_like(F)
        A = np.empty((ne, nq, d, d, d, d)) if with_tangent else None
        P33 = np.empty((ne, nq)) if d == 2 else None
        s33 = np.empty((ne, nq)) if d == 2 else None
        for part, elems in self._groups:
            try:
                st = evaluate(self.materials[part], F[elems])
            except InvertedElement as exc:
                e, q = exc.location[:2]
                eid = int(self.mesh.element_ids[elems[e]])
                raise InvertedElement(f"det F <= 0 in element {eid}, quadrature point {q}",
                                      location=(eid, int(q))) from None
            P[elems] = st.P
            sig[elems] = st.sigma
            if with_tangent:
                A[elems] = st.A
            if d == 2:
                P33[elems] = st.P33
                s33[elems] = st.sigma33
        return PointState(F, P, sig, A, P33, s33)

    # -- assembly ---------------------------------------------------------
    def internal_force(self, P):
        fe = np.einsum('eqiJ,eqaJ,eq->eai', P, self.dNdX, self.wdetJ)
        return np.bincount(self.edofs.ravel(), fe.ravel(), minlength=self.n_full)

    def stiffness(self, A):
        ne, n_edof = self.edofs.shape
        blocks = []
        for s in range(0, ne, _CHUNK):
            sl = slice(s, s + _CHUNK)
            Aw = A[sl] * self.wdetJ[sl, :, None, None, None, None]
            tmp = np.einsum('eqiJkL,eqbL->eqiJbk', Aw, self.dNdX[sl], optimize=True)
            Ke = np.einsum('eqaJ,eqiJbk->eaibk', self.dNdX[sl], tmp, optimize=True)
            blocks.append(Ke.reshape(-1, n_edof, n_edof))
        Ke = np.concatenate(blocks)
        rows = np.broadcast_to(self.edofs[:, :, None], Ke.shape).ravel()
        cols = np.broadcast_to(self.edofs[:, None, :], Ke.shape).ravel()
        K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(self.n_full, self.n_full))
        return K

    def residual(self, qp):
        return self.TT @ self.internal_force(qp.P)

    def tangent(self, qp):
        return (self.TT @ self.stiffness(qp.A) @ self.T).tocsr()

    def evaluate(self, z, factor, with_tangent=True):
        """Residual (and reduced tangent) at reduced state ``z``.

        Returns
        -------
        r : ndarray
        K : scipy.sparse.csr_matrix or None
        u : ndarray (n_nodes, d)
        H : ndarray (d, d)
        qp : PointState
        """
        u, H = self.displacement(z, factor)
        qp = self.point_states(self.deformation_gradients(u), with_tangent)
        r = self.residual(qp)
        K = self.tangent(qp) if with_tangent else None
        return r, K, u, H, qp

    def energy(self, F):
        total = 0.0
        for part, elems in self._groups:
            W = strain_energy(self.materials[part], F[elems])
            total += float(np.sum(W * self.wdetJ[elems]))
        return total

    def field_state(self, time, z, factor):
        u, H = self.displacement(z, factor)
        F = self.deformation_gradients(u)
        qp = self.point_states(F, with_tangent=False)
        return FieldState(time, z.copy(), u, H, qp, self.energy(F))


def assemble(mesh, materials, constraint_system, field_state, factor=1.0):
    """Reduced residual and tangent at ``field_state.z``."""
    problem = RVEProblem(mesh, materials, constraint_system)
    r, K, *_ = problem.evaluate(np.asarray(field_state.z, float), factor)
    return r, K


def internal_energy(problem, state):
    """Total stored energy of ``state`` over the RVE."""
    return problem.energy(state.qp_states.F)


def _cholmod_solve(K, rhs):
    from cvxopt import cholmod, matrix, spmatrix
    L = sp.tril(K).tocoo()
    A = spmatrix(matrix(L.data), matrix(L.row.astype(np.int64)),
                 matrix(L.col.astype(np.int64)), K.shape)
    b = matrix(np.array(rhs, dtype=float).reshape(-1, 1))
    opts = dict(cholmod.options)
    cholmod.options['supernodal'] = 2
    cholmod.options['postorder'] = True
    try:
        Fac = cholmod.symbolic(A, uplo='L')
        cholmod.numeric(A, Fac)
        cholmod.solve(Fac, b)
    finally:
        cholmod.options.clear()
        cholmod.options.update(opts)
    return np.array(b).ravel()


# above this many unknowns the Cholesky fill no longer fits in a few GB
DIRECT_LIMIT = 40000


def _amg_solve(K, rhs, tol=1e-12):
    """Smoothed-aggregation preconditioned CG; None if it does not converge."""
    import pyamg
    ml = pyamg.smoothed_aggregation_solver(K, symmetry='symmetric', max_coarse=500)
    x = ml.solve(rhs, tol=tol, accel='cg', maxiter=1000)
    res = np.linalg.norm(rhs - K @ x)
    if not np.isfinite(res) or res > 1e-10 * np.linalg.norm(rhs):
        return None
    return x


def solve_linear(K, rhs, context=""):
    """Solve ``K x = rhs`` for symmetric ``K``.

    Sparse Cholesky is tried first; indefinite or semidefinite matrices fall
    back to sparse LU. Systems larger than ``DIRECT_LIMIT`` (or a Cholesky
    that runs out of memory) go to algebraic-multigrid preconditioned CG
    instead, with a direct fallback if CG stalls. Either way the result
    satisfies ``|K x - rhs| <= 1e-10 |rhs|`` (up to two refinement passes
    are allowed to get there).

    Raises
    ------
    LinearSolveError
        Singular matrix or backward error above the contract.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if n == 0:
        return rhs.copy()
    K = sp.csr_matrix(K)
    where = f" ({context})" if context else ""
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros(n)

    if n > DIRECT_LIMIT:
        x = _amg_solve(K, rhs)
        if x is not None:
            return x
    solve = None
    try:
        x = _cholmod_solve(K, rhs)
        solve = lambda b: _cholmod_solve(K, b)
    except MemoryError:
        x = _amg_solve(K, rhs)
        if x is None:
            raise LinearSolveError(f"factorization out of memory and CG did not "
                                   f"converge{where}") from None
        return x
    except ArithmeticError:
        try:
            lu = spla.splu(K.tocsc(), permc_spec='MMD_AT_PLUS_A')
        except RuntimeError as exc:
            raise LinearSolveError(f"singular tangent{where}: {exc}") from None
        x = lu.solve(rhs)
        solve = lu.solve
    for _ in range(2):
        res = rhs - K @ x
        if np.all(np.isfinite(res)) and np.linalg.norm(res) <= 1e-10 * bnorm:
            return x
        x = x + solve(res)
    res = rhs - K @ x
    if not (np.all(np.isfinite(res)) and np.linalg.norm(res) <= 1e-10 * bnorm):
        raise LinearSolveError(f"direct solve backward error "
                               f"{np.linalg.norm(res) / bnorm:.2e} exceeds 1e-10{where}")
    return x


@dataclass(eq=False)
class RunResult:
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    # (step index, time, [residual norms]) per completed (sub)step
    history: list = field(default_factory=list)


class _StepFailed(Exception):
    pass


MACRO_RTOL = 1e-11


def _macro_converged(problem, qp, r, controls):
    """Free-gradient rows are |Omega| * P_bar_ij; hold them to an absolute bound."""
    n_fl = problem.cs.n_fluct
    if r.size == n_fl:
        return True
    P_bar = np.einsum('eqij,eq->ij', qp.P, problem.wdetJ)
    tol = max(controls.newton_atol, MACRO_RTOL * np.max(np.abs(P_bar)))
    return bool(np.max(np.abs(r[n_fl:])) <= tol)


def _newton(problem, z, factor, controls, step, t):
    norms = []
    r0 = None
    for it in range(controls.max_newton_iters + 1):
        u, _ = problem.displacement(z, factor)
        qp = problem.point_states(problem.deformation_gradients(u))
        r = problem.residual(qp)
        norm = float(np.linalg.norm(r))
        norms.append(norm)
        log.info("step=%d t=%.6g it=%d r=%.6e", step, t, it, norm)
        if not math.isfinite(norm):
            raise _StepFailed("non-finite residual")
        if r0 is None:
            r0 = norm
        if norm <= max(controls.newton_atol, controls.newton_rtol * r0) \
                and _macro_converged(problem, qp, r, controls):
            return z, norms
        if it == controls.max_newton_iters:
            break
        K = problem.tangent(qp)
        z = z + solve_linear(K, -r, context=f"step {step}, Newton iteration {it}")
    raise _StepFailed(f"no convergence in {controls.max_newton_iters} iterations")


def _advance(problem, z, t0, t1, curve, controls, step, history, depth=0):
    """Equilibrate from converged (z, t0) to t1, halving on failure."""
    try:
        z1, norms = _newton(problem, z, curve(t1), controls, step, t1)
        history.append((step, t1, norms))
        return z1
    except (_StepFailed, InvertedElement, LinearSolveError) as exc:
        if depth >= controls.max_cutbacks:
            raise NonConvergence(f"step {step} at t={t1:g}: {exc} "
                                 f"(after {depth} cutbacks)") from None
        log.warning("step=%d t=%.6g cutback=%d reason=%s", step, t1, depth + 1, exc)
        tm = t0 + controls.divergence_cutback * (t1 - t0)
        zm = _advance(problem, z, t0, tm, curve, controls, step, history, depth + 1)
        return _advance(problem, zm, tm, t1, curve, controls, step, history, depth + 1)


def output_steps(end_time, n_steps, dt_out):
    """Step indices at which outputs at interval ``dt_out`` are written."""
    if dt_out is None or dt_out <= 0:
        return list(range(n_steps + 1))
    dt = end_time / n_steps
    m = int(math.floor(end_time / dt_out + 1e-9))
    steps = sorted({min(n_steps, int(round(k * dt_out / dt))) for k in range(m + 1)})
    return steps


def run(mesh, materials, constraint_system, load, controls=None, curve=None,
        dt_out=None, keep_states=True, on_output=None):
    """Incremental Newton solution over ``[0, load.end_time]``.

    Parameters
    ----------
    mesh, materials, constraint_system, load
        Problem definition; ``materials`` maps part id to a material model.
    controls : SolveControls, optional
    curve : LoadCurve, optional
        Defaults to a linear ramp reaching 1 at ``load.end_time``.
    dt_out : float, optional
        Output interval; every step is output if omitted.
    keep_states : bool
        Keep :class:`FieldState` objects at output steps in the result.
    on_output : callable, optional
        Called as ``on_output(step, state, record)`` at each output step.

    Returns
    -------
    RunResult

    Raises
    ------
    NonConvergence
        With ``partial`` set to the results produced before the failure.
    """
    from .homogenize import record_from_state

    controls = controls or SolveControls()
    curve = curve or LoadCurve.ramp(load.end_time)
    problem = RVEProblem(mesh, materials, constraint_system)
    out_steps = set(output_steps(load.end_time, controls.n_steps, dt_out))
    result = RunResult()
    dt = load.end_time / controls.n_steps
    z = np.zeros(constraint_system.n_unknowns)
    t_prev = 0.0

    def emit(step, t, z):
        state = problem.field_state(t, z, curve(t))
        rec = record_from_state(problem, state)
        result.records.append(rec)
        if keep_states:
            result.states.append(state)
        if on_output is not None:
            on_output(step, state, rec)

    try:
        for step in range(controls.n_steps + 1):
            t = step * dt
            if step == 0:
                z, norms = _newton(problem, z, curve(0.0), controls, 0, 0.0)
                result.history.append((0, 0.0, norms))
            else:
                z = _advance(problem, z, t_prev, t, curve, controls, step, result.history)
            t_prev = t
            if step in out_steps:
                emit(step, t, z)
    except _StepFailed as exc:
        raise NonConvergence(f"initial state: {exc}", partial=result) from None
    except (NonConvergence, InvertedElement, LinearSolveError) as exc:
        err = exc if isinstance(exc, NonConvergence) else NonConvergence(str(exc))
        err.partial = result
        raise err from None
    return result
