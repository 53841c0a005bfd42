import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from rvefem import solver
from rvefem.constraints import BCKind, MacroLoad, build_constraints
from rvefem.homogenize import (VOIGT_PAIRS, average_gradient, average_stress,
                               effective_tangent, macro_work, make_record, probe_gradient)
from rvefem.material import LinearElastic, MooneyRivlin, PointState
from rvefem.mesh import generate_laminate_2d, generate_voxel_sphere, pair_periodic_nodes
from rvefem.oracles import isotropic_stiffness, laminate_bounds
from rvefem.solver import FieldState, SolveControls, run


def solve(mesh, materials, load, bc, steps=1, **kw):
    pairings = pair_periodic_nodes(mesh) if bc == BCKind.PDBC else None
    cs = build_constraints(mesh, pairings, load, bc)
    return run(mesh, materials, cs, load, SolveControls(n_steps=steps), **kw)


def test_average_of_uniform_stress():
    m = generate_voxel_sphere(3, 0.3)
    P0 = np.array([[1.0, 0.2, 0.0], [0.1, -2.0, 0.3], [0.0, 0.3, 0.5]])
    P = np.broadcast_to(P0, (m.n_elements, 8, 3, 3))
    F = np.broadcast_to(np.eye(3), P.shape)
    P_bar, s_bar = average_stress(m, PointState(F, P, P, None))
    np.testing.assert_allclose(P_bar, P0, rtol=1e-15, atol=1e-15)
    np.testing.assert_allclose(s_bar, P0, rtol=1e-15, atol=1e-15)


def test_uniaxial_strain_homogeneous_ldbc():
    m = generate_voxel_sphere(3, 0.3)
    mat = LinearElastic(1.0, 0.3)
    lam, mu = mat.lame
    rec = solve(m, {1: mat, 2: mat}, MacroLoad(np.diag([1e-3, 0, 0])), BCKind.LDBC).records[-1]
    np.testing.assert_allclose(np.diag(rec.sigma_bar), [(lam + 2 * mu) * 1e-3, lam * 1e-3,
                                                        lam * 1e-3], rtol=1e-10)


@pytest.mark.parametrize("axis", [0, 1])
def test_laminate_phase_average(axis):
    m = generate_laminate_2d(10, 6, 0.5)
    mats = {1: LinearElastic(1.0, 0.0), 2: LinearElastic(10.0, 0.0)}
    H = np.zeros((2, 2))
    H[axis, axis] = 1e-3
    res = solve(m, mats, MacroLoad(H), BCKind.PDBC)
    s = res.states[-1]
    b = laminate_bounds(1.0, 10.0, 0.5)
    # phase-wise averages are uniform stresses in a laminate
    phase = {}
    for pid in (1, 2):
        sel = m.part_ids == pid
        phase[pid] = s.qp_states.sigma[sel].mean(axis=(0, 1))
    mix = 0.5 * phase[1] + 0.5 * phase[2]
    rec = res.records[-1]
    np.testing.assert_allclose(rec.sigma_bar, mix, rtol=1e-8, atol=1e-14)
    expect = b.reuss if axis == 0 else b.voigt
    assert rec.sigma_bar[axis, axis] == pytest.approx(expect * 1e-3, rel=1e-8)


def test_average_gradient_of_zero_field():
    m = generate_voxel_sphere(2, 0.3)
    state = FieldState(0.0, np.zeros(0), np.zeros((m.n_nodes, 3)), np.zeros((3, 3)), None)
    np.testing.assert_array_equal(average_gradient(m, state), 0.0)


def test_average_gradient_ldbc_large_stretch(rubber):
    m = generate_voxel_sphere(4, 0.3)
    load = MacroLoad.from_components(3, {(0, 0): 0.5})
    res = solve(m, rubber, load, BCKind.LDBC, steps=10)
    for state, rec in zip(res.states, res.records):
        assert np.abs(rec.H_bar - state.H_current).max() <= 1e-10
    assert abs(res.records[-1].H_bar[0, 0] - 0.5) <= 1e-10


def test_average_gradient_pdbc_sphere(soft_hard):
    m = generate_voxel_sphere(6, 0.3)
    load = MacroLoad.from_components(3, {(0, 0): 1e-2, (0, 1): 3e-3})
    res = solve(m, soft_hard, load, BCKind.PDBC, steps=2)
    for state, rec in zip(res.states, res.records):
        assert np.abs(rec.H_bar - state.H_current).max() <= 1e-10


def test_free_components_carry_no_stress(rubber):
    m = generate_voxel_sphere(4, 0.3)
    load = MacroLoad.from_components(3, {(0, 0): 0.5})
    rec = solve(m, rubber, load, BCKind.PDBC, steps=10).records[-1]
    free = ~load.prescribed
    assert np.abs(rec.P_bar[free]).max() <= 1e-10 * np.abs(rec.P_bar).max()
    # lateral contraction under uniaxial tension
    assert rec.F_bar[1, 1] < 1.0 and rec.F_bar[2, 2] < 1.0


def test_make_record_examples():
    r = make_record(0.0, np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3)))
    np.testing.assert_array_equal(r.F_bar, np.eye(3))
    np.testing.assert_array_equal(r.E_bar, 0.0)
    r = make_record(1.0, np.diag([0.5, -0.18, -0.17]), np.zeros((3, 3)), np.zeros((3, 3)))
    assert r.E_bar[0, 0] == 0.625
    R = Rotation.from_rotvec([0.3, -0.2, 0.9]).as_matrix()
    r = make_record(1.0, R - np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)))
    assert np.abs(r.E_bar).max() <= 1e-15


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=9, max_size=9))
def test_green_strain_identity(vals):
    H = np.reshape(vals, (3, 3))
    r = make_record(0.0, H, np.zeros((3, 3)), np.zeros((3, 3)))
    F = r.F_bar
    assert np.abs(r.E_bar - 0.5 * (F.T @ F - np.eye(3))).max() <= 1e-12
    np.testing.assert_array_equal(r.E_bar, r.E_bar.T)


def test_probe_gradient_uses_engineering_shear():
    H = probe_gradient(3, 3, 2e-6)
    assert H[1, 2] == H[2, 1] == 1e-6
    assert np.count_nonzero(H) == 2
    assert probe_gradient(2, 2, 1e-6)[0, 1] == 5e-7


@pytest.mark.parametrize("bc", list(BCKind))
@pytest.mark.parametrize("dim", [2, 3])
def test_homogeneous_tangent_is_isotropic(bc, dim):
    mat = LinearElastic(1.0, 0.3)
    m = generate_voxel_sphere(3, 0.3) if dim == 3 else generate_laminate_2d(4, 4, 0.5)
    C = effective_tangent(m, {1: mat, 2: mat}, bc).C_eff
    ref = isotropic_stiffness(1.0, 0.3, dim)
    np.testing.assert_allclose(C, ref, rtol=0, atol=1e-8 * np.abs(ref).max())
    if dim == 3:
        assert C[0, 0] == pytest.approx(1.34615385, abs=1e-8)
        assert C[0, 1] == pytest.approx(0.57692308, abs=1e-8)
        assert C[3, 3] == pytest.approx(0.38461538, abs=1e-8)


def test_laminate_tangent_hits_bounds():
    m = generate_laminate_2d(10, 4, 0.5)
    mats = {1: LinearElastic(1.0, 0.0), 2: LinearElastic(10.0, 0.0)}
    C = effective_tangent(m, mats, BCKind.PDBC).C_eff
    b = laminate_bounds(1.0, 10.0, 0.5)
    assert C[1, 1] == pytest.approx(b.voigt, rel=1e-6)
    assert C[0, 0] == pytest.approx(b.reuss, rel=1e-6)
    assert b.voigt == 5.5 and b.reuss == pytest.approx(1.8181818, rel=1e-7)


def _phase_bounds(mesh, mats):
    f2 = np.mean(mesh.part_ids == 2)
    C1 = isotropic_stiffness(mats[1].E, mats[1].nu)
    C2 = isotropic_stiffness(mats[2].E, mats[2].nu)
    upper = (1 - f2) * C1 + f2 * C2
    lower = np.linalg.inv((1 - f2) * np.linalg.inv(C1) + f2 * np.linalg.inv(C2))
    return lower, upper


def test_two_phase_tangent_properties(soft_hard):
    m = generate_voxel_sphere(6, 0.3)
    Cp = effective_tangent(m, soft_hard, BCKind.PDBC).C_eff
    Cl = effective_tangent(m, soft_hard, BCKind.LDBC).C_eff
    for C in (Cp, Cl):
        assert np.abs(C - C.T).max() <= 1e-6 * np.abs(C).max()
        assert np.linalg.eigvalsh(0.5 * (C + C.T)).min() > 0
        lower, upper = _phase_bounds(m, soft_hard)
        sym = 0.5 * (C + C.T)
        assert np.linalg.eigvalsh(upper - sym).min() >= -1e-8
        assert np.linalg.eigvalsh(sym - lower).min() >= -1e-8
    D = 0.5 * ((Cl - Cp) + (Cl - Cp).T)
    assert np.linalg.eigvalsh(D).min() >= -1e-8


def test_tangent_columns_subset(soft_hard):
    m = generate_voxel_sphere(3, 0.3)
    et = effective_tangent(m, soft_hard, BCKind.PDBC, columns=[0])
    assert np.all(np.isfinite(et.C_eff[:, 0]))
    assert np.all(np.isnan(et.C_eff[:, 1:]))
    assert et.probe_magnitude == 1e-6 and et.bc_kind == BCKind.PDBC


def test_hill_mandel_energy(rubber):
    m = generate_voxel_sphere(4, 0.3)
    load = MacroLoad.from_components(3, {(0, 0): 0.5})
    res = solve(m, rubber, load, BCKind.PDBC, steps=20)
    W = macro_work(res.records, m.volume)
    assert res.states[-1].energy == pytest.approx(W, rel=1e-3)


def test_plane_strain_record_carries_out_of_plane_stress():
    m = generate_laminate_2d(4, 4, 0.5)
    mat = LinearElastic(1.0, 0.3)
    lam, mu = mat.lame
    rec = solve(m, {1: mat, 2: mat}, MacroLoad(np.diag([1e-3, 0.0])), BCKind.PDBC).records[-1]
    assert rec.P33_bar == pytest.approx(lam * 1e-3, rel=1e-10)
    assert rec.sigma33_bar == pytest.approx(lam * 1e-3, rel=1e-10)


def test_voigt_pairs_order():
    assert VOIGT_PAIRS[3] == ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
    assert VOIGT_PAIRS[2] == ((0, 0), (1, 1), (0, 1))


def test_cauchy_average_uses_deformed_volume():
    m = generate_voxel_sphere(2, 0.3)
    mats = {1: MooneyRivlin(0.4, 0.1, 20.0), 2: MooneyRivlin(4.0, 1.0, 200.0)}
    res = solve(m, mats, MacroLoad(np.diag([0.4, 0.0, 0.0])), BCKind.PDBC, steps=4)
    s, rec = res.states[-1], res.records[-1]
    p = solver.RVEProblem(m, mats, build_constraints(m, pair_periodic_nodes(m),
                                                        MacroLoad(np.diag([0.4, 0, 0])), 0))
    J = np.linalg.det(s.qp_states.F)
    # sigma_bar |omega| = integral of P F^T over the reference volume
    PFt = np.einsum('eqik,eqjk->eqij', s.qp_states.P, s.qp_states.F)
    lhs = rec.sigma_bar * np.sum(J * p.wdetJ)
    rhs = np.einsum('eqij,eq->ij', PFt, p.wdetJ)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())
