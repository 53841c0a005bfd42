import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import ELASTIC_CARDS
from rvefem.cli import main
from rvefem.deck_io import parse_mesh_text, parse_rveout
from rvefem.mesh import generate_laminate_2d, generate_voxel_sphere
from rvefem.oracles import isotropic_stiffness, laminate_bounds

LAMINATE_CARDS = """\
*MAT_ELASTIC
1, 0.0, 1.0, 0.0
2, 0.0, 10.0, 0.0
*PART
1, 1
2, 2
"""


def _matrix(text):
    return np.array([[float(v) for v in line.split()] for line in text.strip().splitlines()])


def test_run_writes_rveout(make_case, capsys):
    deck = make_case(generate_voxel_sphere(4, 0.3),
                     extra="*CONTROL_SOLUTION\n4\n*DATABASE_RVE\n0.5\n")
    assert main(['--quiet', 'run', str(deck)]) == 0
    out = capsys.readouterr().out.strip()
    assert out == str(deck.parent / 'rveout')
    recs = parse_rveout((deck.parent / 'rveout').read_text())
    assert [r['time'] for r in recs] == [0.0, 0.5, 1.0]
    assert recs[-1]['F'][0, 0] == 1.5
    assert 'F11= 0.1500000000E+01' in (deck.parent / 'rveout').read_text()


def test_run_no_rveout_when_oupt_zero(make_case):
    deck = make_case(generate_voxel_sphere(2, 0.3), flags="0, 0, 1, 3, 1, 1", H="0.1",
                     extra="*CONTROL_SOLUTION\n2\n")
    assert main(['--quiet', 'run', str(deck)]) == 0
    assert not (deck.parent / 'rveout').exists()


def test_run_field_snapshots(make_case, tmp_path):
    deck = make_case(generate_voxel_sphere(3, 0.3), H="0.2",
                     extra="*CONTROL_SOLUTION\n4\n*DATABASE_FIELD\n0.3\n")
    out = tmp_path / 'out'
    assert main(['--quiet', 'run', str(deck), '--out-dir', str(out)]) == 0
    snaps = sorted(p.name for p in out.glob('field_*.vtk'))
    # floor(1.0 / 0.3) + 1 snapshots including t = 0
    assert len(snaps) == 4
    assert (out / 'rveout').exists()


def test_output_snaps_to_nearest_step(make_case):
    deck = make_case(generate_voxel_sphere(2, 0.3), H="0.2",
                     extra="*CONTROL_SOLUTION\n7\n*DATABASE_RVE\n0.3\n")
    assert main(['--quiet', 'run', str(deck)]) == 0
    times = [r['time'] for r in parse_rveout((deck.parent / 'rveout').read_text())]
    np.testing.assert_allclose(times, [0.0, 2 / 7, 4 / 7, 6 / 7], rtol=1e-9)


def test_run_steps_and_rtol_flags(make_case):
    deck = make_case(generate_voxel_sphere(2, 0.3), H="0.3", extra="*DATABASE_RVE\n0.25\n")
    assert main(['--quiet', 'run', str(deck), '--steps', '4', '--rtol', '1e-9']) == 0
    recs = parse_rveout((deck.parent / 'rveout').read_text())
    assert len(recs) == 5


def test_run_bad_bc_exit_2(make_case, capsys):
    deck = make_case(generate_voxel_sphere(2, 0.3), flags="0, 1, 1, 3, 2, 1")
    assert main(['--quiet', 'run', str(deck)]) == 2
    err = capsys.readouterr().err
    assert 'bc must be 0 (PDBC) or 1 (LDBC)' in err
    assert 'line 9' in err


def test_run_missing_deck_exit_4(tmp_path, capsys):
    assert main(['--quiet', 'run', str(tmp_path / 'nope.k')]) == 4
    assert 'nope.k' in capsys.readouterr().err


def test_run_nonconvergence_exit_3_with_partial_output(make_case, capsys):
    deck = make_case(generate_voxel_sphere(2, 0.3), H="-1.0",
                     extra="*CONTROL_SOLUTION\n10\n*DATABASE_RVE\n0.1\n")
    assert main(['--quiet', 'run', str(deck)]) == 3
    assert 'step 9' in capsys.readouterr().err
    # with the lateral components free the cell collapses one step earlier than
    # under a fully prescribed gradient; everything up to t = 0.8 is kept
    recs = parse_rveout((deck.parent / 'rveout').read_text())
    assert len(recs) == 9
    assert recs[-1]['time'] == pytest.approx(0.8)


def test_tangent_homogeneous(make_case, capsys):
    cards = "*MAT_ELASTIC\n1, 0.0, 1.0, 0.3\n*PART\n1, 1\n2, 1\n"
    deck = make_case(generate_voxel_sphere(3, 0.3), cards=cards)
    assert main(['--quiet', 'tangent', str(deck)]) == 0
    C = _matrix(capsys.readouterr().out)
    ref = isotropic_stiffness(1.0, 0.3)
    assert C.shape == (6, 6)
    np.testing.assert_allclose(C, ref, atol=1e-8 * ref.max())


def test_tangent_laminate(make_case, capsys):
    deck = make_case(generate_laminate_2d(10, 4, 0.5), cards=LAMINATE_CARDS,
                     flags="0, 1, 1, 2, 0, 1", H="1e-3")
    assert main(['--quiet', 'tangent', str(deck)]) == 0
    C = _matrix(capsys.readouterr().out)
    b = laminate_bounds(1.0, 10.0, 0.5)
    assert C[1, 1] == pytest.approx(b.voigt, rel=1e-6)
    assert C[0, 0] == pytest.approx(b.reuss, rel=1e-6)


def test_tangent_ldbc_stiffer_than_pdbc(make_case, capsys):
    mesh = generate_voxel_sphere(4, 0.3)
    Cs = {}
    for bc in (0, 1):
        deck = make_case(mesh, cards=ELASTIC_CARDS, flags=f"0, 1, 1, 3, {bc}, 1", H="1e-3")
        assert main(['--quiet', 'tangent', str(deck)]) == 0
        Cs[bc] = _matrix(capsys.readouterr().out)
    D = Cs[1] - Cs[0]
    assert np.linalg.eigvalsh(0.5 * (D + D.T)).min() >= -1e-8


def test_gen_sphere(tmp_path):
    out = tmp_path / 'sphere.k'
    assert main(['gen', 'sphere', 'n=10', 'r=0.3', '-o', str(out)]) == 0
    d = parse_mesh_text(out.read_text())
    assert len(d.elements) == 1000 and len(d.nodes) == 11**3
    assert sum(e.part_id == 2 for e in d.elements) == 136


def test_gen_laminate_stdout(capsys):
    assert main(['gen', 'laminate', 'nx=10', 'ny=6', 'f=0.5']) == 0
    d = parse_mesh_text(capsys.readouterr().out)
    assert sum(e.part_id == 1 for e in d.elements) == 30


@pytest.mark.parametrize("args", [['sphere', 'n=0'], ['sphere', 'size=3'],
                                  ['laminate', 'f=1.5'], ['sphere', 'n=abc']])
def test_gen_bad_parameters_exit_2(args, capsys):
    assert main(['gen'] + args) == 2
    assert capsys.readouterr().err.startswith('error:')


def test_check_sphere(tmp_path, capsys):
    path = tmp_path / 's.k'
    main(['gen', 'sphere', 'n=4', '-o', str(path)])
    assert main(['check', str(path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith('dimension 3, 125 nodes, 64 elements, volume 1')
    assert lines[1:] == [f'axis {a}: 25 pairs' for a in (1, 2, 3)]


def test_check_laminate_two_axes(tmp_path, capsys):
    path = tmp_path / 'l.k'
    main(['gen', 'laminate', 'nx=4', 'ny=2', '-o', str(path)])
    assert main(['check', str(path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1:] == ['axis 1: 3 pairs', 'axis 2: 5 pairs']


def test_check_perturbed_node_exit_5(tmp_path, capsys):
    path = tmp_path / 's.k'
    main(['gen', 'sphere', 'n=2', '-o', str(path)])
    lines = path.read_text().splitlines()
    # node 2 sits at x = 0.5, y = z = 0; push it off the matching grid
    k = next(i for i, l in enumerate(lines) if l.split(',')[0].strip() == '2')
    nid, x, y, z = [v.strip() for v in lines[k].split(',')]
    lines[k] = f"{nid}, {float(x) + 0.01}, {y}, {z}"
    path.write_text('\n'.join(lines) + '\n')
    assert main(['check', str(path)]) == 5
    # node 8 (x = 0.5, y = 1) lost its y-partner
    assert capsys.readouterr().out == 'not PDBC-matching: node 8, axis 2\n'


def test_check_deck_with_mesh_reference(make_case, capsys):
    deck = make_case(generate_voxel_sphere(2, 0.3))
    assert main(['check', str(deck)]) == 0
    assert 'axis 3: 9 pairs' in capsys.readouterr().out


def test_console_entry_point(tmp_path):
    env = dict(os.environ)
    r = subprocess.run([sys.executable, '-m', 'rvefem.cli', 'gen', 'sphere', 'n=0'],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 2
    assert r.stdout == '' and r.stderr.startswith('error:')
