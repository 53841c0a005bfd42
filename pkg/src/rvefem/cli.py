"""Command-line driver: ``rvefem run | tangent | gen | check``.

Exit codes: 0 success, 2 input/parse error, 3 solver non-convergence,
4 I/O error, 5 mesh not PDBC-matching (``check``).
"""

import argparse
import logging
import os
import sys

import numpy as np

from .constraints import BCKind, ConstraintError, build_constraints
from .deck_io import (DeckError, build_mesh, format_number, parse_mesh_text, read_deck,
                      write_field_snapshot, write_mesh_keyword, write_rveout)
from .homogenize import effective_tangent
from .mesh import MatchFailure, MeshError, generate_laminate_2d, generate_voxel_sphere, \
    load_mesh, pair_periodic_nodes
from .solver import NonConvergence, output_steps, run

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_IO, EXIT_MATCH = 0, 2, 3, 4, 5

log = logging.getLogger('rvefem')


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load(deck_path):
    deck = read_deck(deck_path)
    mesh = build_mesh(deck)
    return deck, mesh


def cmd_run(deck_path, steps=None, rtol=None, out_dir=None):
    try:
        deck, mesh = _load(deck_path)
        controls = deck.solve_controls(n_steps=steps, newton_rtol=rtol)
        load = deck.rve.macro_load(deck.termination)
        bc = BCKind(deck.rve.bc)
        pairings = pair_periodic_nodes(mesh, deck.geom_tol) if bc == BCKind.PDBC else None
        cs = build_constraints(mesh, pairings, load, bc, deck.geom_tol)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except (DeckError, MeshError, ConstraintError, ValueError) as exc:
        return _fail(EXIT_PARSE, f"{deck_path}: {exc}")

    out_dir = out_dir or os.path.dirname(os.path.abspath(deck_path))
    end = deck.termination
    rve_steps = set(output_steps(end, controls.n_steps, deck.dt_rveout))
    field_steps = set(output_steps(end, controls.n_steps, deck.dt_field)) \
        if deck.dt_field else set()
    records = []

    def on_output(step, state, rec):
        if step in rve_steps:
            records.append(rec)
        if step in field_steps:
            write_field_snapshot(mesh, state, state.time,
                                 os.path.join(out_dir, f'field_{step:04d}.vtk'))

    code = EXIT_OK
    try:
        os.makedirs(out_dir, exist_ok=True)
        run(mesh, deck.materials, cs, load, controls, deck.load_curve(),
            dt_out=None, keep_states=False, on_output=on_output)
    except NonConvergence as exc:
        code = _fail(EXIT_SOLVER, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))

    if deck.rve.oupt == 1 and records:
        path = os.path.join(out_dir, 'rveout')
        try:
            with open(path, 'w', encoding='utf-8') as fh:
                write_rveout(records, fh)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write {path}: {exc}")
        print(path)
    return code


def format_matrix(C):
    return '\n'.join('  '.join(format_number(v) for v in row) for row in C)


def cmd_tangent(deck_path):
    try:
        deck, mesh = _load(deck_path)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except (DeckError, MeshError, ValueError) as exc:
        return _fail(EXIT_PARSE, f"{deck_path}: {exc}")
    try:
        et = effective_tangent(mesh, deck.materials, deck.rve.bc,
                               controls=deck.solve_controls(n_steps=1),
                               geom_tol=deck.geom_tol)
    except MeshError as exc:
        return _fail(EXIT_PARSE, str(exc))
    except NonConvergence as exc:
        return _fail(EXIT_SOLVER, str(exc))
    print(format_matrix(et.C_eff))
    return EXIT_OK


_GEN_KEYS = {
    'sphere': {'n': int, 'r': float, 'cells': int},
    'laminate': {'nx': int, 'ny': int, 'f': float},
}


def _gen_params(kind, params):
    allowed = _GEN_KEYS[kind]
    out = {}
    for p in params:
        key, sep, val = p.partition('=')
        if not sep or key not in allowed:
            raise ValueError(f"bad parameter {p!r} for {kind} "
                             f"(expected {', '.join(k + '=' for k in allowed)})")
        out[key] = allowed[key](val)
    return out


def cmd_gen(kind, params, out_path):
    try:
        kw = _gen_params(kind, params)
        if kind == 'sphere':
            mesh = generate_voxel_sphere(kw.get('n', 10), kw.get('r', 0.3),
                                         n_cells=kw.get('cells', 1))
        else:
            mesh = generate_laminate_2d(kw.get('nx', 10), kw.get('ny', 10), kw.get('f', 0.5))
    except (ValueError, MeshError) as exc:
        return _fail(EXIT_PARSE, str(exc))
    try:
        if out_path in (None, '-'):
            write_mesh_keyword(mesh, sys.stdout)
        else:
            with open(out_path, 'w', encoding='utf-8') as fh:
                write_mesh_keyword(mesh, fh)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {out_path}: {exc}")
    return EXIT_OK


def cmd_check(path):
    try:
        with open(path, encoding='utf-8') as fh:
            text = fh.read()
        deck = parse_mesh_text(text)
        if deck.rve is not None and not deck.nodes:
            deck = read_deck(path)
        mesh = load_mesh(deck.nodes, deck.elements)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except DeckError as exc:
        return _fail(EXIT_PARSE, f"{path}: {exc}")
    except MeshError as exc:
        return _fail(EXIT_MATCH, f"{path}: {exc}")
    try:
        pairings = pair_periodic_nodes(mesh, deck.geom_tol)
    except MatchFailure as exc:
        print(f"not PDBC-matching: node {exc.node_id}, axis {exc.axis + 1}")
        return _fail(EXIT_MATCH, str(exc))
    print(f"dimension {mesh.dimension}, {mesh.n_nodes} nodes, {mesh.n_elements} elements, "
          f"volume {mesh.volume:.12g}")
    for p in pairings:
        print(f"axis {p.axis + 1}: {len(p.pairs)} pairs")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog='rvefem', description=__doc__.splitlines()[0])
    ap.add_argument('--quiet', action='store_true', help='only warnings on stderr')
    sub = ap.add_subparsers(dest='command', required=True)

    p = sub.add_parser('run', help='solve a deck and write rveout / field snapshots')
    p.add_argument('deck')
    p.add_argument('--steps', type=int, help='number of load steps')
    p.add_argument('--rtol', type=float, help='Newton relative tolerance')
    p.add_argument('--out-dir', help='output directory (default: deck directory)')

    p = sub.add_parser('tangent', help='print the homogenized Voigt stiffness')
    p.add_argument('deck')

    p = sub.add_parser('gen', help='generate a microstructure mesh file')
    p.add_argument('kind', choices=sorted(_GEN_KEYS))
    p.add_argument('params', nargs='*', help='key=value, e.g. n=10 r=0.3')
    p.add_argument('-o', '--out', help='output file (default stdout)')

    p = sub.add_parser('check', help='validate a mesh and its periodic pairing')
    p.add_argument('deck')
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(message)s'))
    log.handlers[:] = [handler]
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    log.propagate = False
    np.seterr(all='ignore')

    if args.command == 'run':
        return cmd_run(args.deck, args.steps, args.rtol, args.out_dir)
    if args.command == 'tangent':
        return cmd_tangent(args.deck)
    if args.command == 'gen':
        return cmd_gen(args.kind, args.params, args.out)
    return cmd_check(args.deck)


if __name__ == '__main__':
    sys.exit(main())
