"""
Keyword deck parsing/printing, rveout history files and VTK field snapshots.

Grammar
-------
* lines starting with ``*`` open a keyword block, ``$`` lines are comments,
  blank lines are ignored;
* data fields are comma separated (an empty field is blank) or, on lines
  without commas, whitespace separated (only trailing fields can be blank);
* supported keywords::

    *NODE                nid, x, y[, z]
    *ELEMENT_SOLID       eid, pid, n1 ... n8          (hex8)
    *ELEMENT_SHELL       eid, pid, n1 ... n4          (quad4, plane strain)
    *PART                pid, mid
    *MAT_ELASTIC         mid, ro, e, pr
    *MAT_MOONEY_RIVLIN   mid, ro, c10, c01, k
    *RVE_ANALYSIS_FEM    mesh file
                         inpt, oupt, lcid, idof, bc, imatch
                         H11, H22, H33, H12, H23, H13
                         [H21, H32, H31]
    *DEFINE_CURVE        lcid
                         t, f   (one point per line)
    *CONTROL_TERMINATION endtim
    *CONTROL_SOLUTION    nsteps, rtol, atol, maxit[, geomtol]
    *DATABASE_RVE        dt
    *DATABASE_FIELD      dt
    *END

Blank H entries are Free components of the macroscopic displacement gradient.
If *RVE_ANALYSIS_FEM carries only its mesh-file line, purely numeric ``$``
lines inside the block are read as the flag and H lines.
"""

import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraints import BCKind, MacroLoad
from .material import LinearElastic, MooneyRivlin
from .mesh import Element, Node, load_mesh
from .solver import LoadCurve, SolveControls

__all__ = ['DeckError', 'RVECard', 'MaterialCard', 'Deck', 'parse_deck', 'parse_mesh_text',
           'print_deck', 'read_deck', 'build_mesh', 'format_number', 'write_rveout',
           'parse_rveout', 'write_field_snapshot', 'write_mesh_keyword', 'von_mises']


class DeckError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# card order of the six standard entries, then the optional transposes
H_CARD = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))
H_CARD_EXTRA = ((1, 0), (2, 1), (2, 0))


@dataclass(frozen=True)
class RVECard:
    mesh_file: str
    inpt: int = 0
    oupt: int = 1
    lcid: int = 0
    idof: int = 3
    bc: int = 0
    imatch: int = 1
    # ((i, j), value) for prescribed entries only, zero-based, sorted
    H: tuple = ()

    def macro_load(self, end_time=1.0):
        return MacroLoad.from_components(self.idof, dict(self.H), lcid=self.lcid,
                                         end_time=end_time)


@dataclass(frozen=True)
class MaterialCard:
    mid: int
    ro: float
    model: object


@dataclass
class Deck:
    rve: Optional[RVECard] = None
    nodes: list = field(default_factory=list)
    elements: list = field(default_factory=list)
    parts: dict = field(default_factory=dict)         # pid -> mid
    mat_cards: dict = field(default_factory=dict)     # mid -> MaterialCard
    curves: dict = field(default_factory=dict)        # lcid -> LoadCurve
    end_time: Optional[float] = None
    dt_rveout: Optional[float] = None
    dt_field: Optional[float] = None
    controls: dict = field(default_factory=dict)      # explicit *CONTROL_SOLUTION values
    geom_tol: Optional[float] = None                  # face-matching tolerance override

    @property
    def materials(self):
        return {pid: self.mat_cards[mid].model for pid, mid in self.parts.items()}

    @property
    def termination(self):
        return 1.0 if self.end_time is None else self.end_time

    def solve_controls(self, **overrides):
        kw = dict(self.controls)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        if 'n_steps' not in kw:
            kw['n_steps'] = 10
        return SolveControls(**kw)

    def load_curve(self):
        if self.rve is None or not self.rve.lcid:
            return LoadCurve.ramp(self.termination)
        return self.curves[self.rve.lcid]


_KEYWORDS = {'NODE', 'ELEMENT_SOLID', 'ELEMENT_SHELL', 'PART', 'MAT_ELASTIC',
             'MAT_MOONEY_RIVLIN', 'RVE_ANALYSIS_FEM', 'DEFINE_CURVE',
             'CONTROL_TERMINATION', 'CONTROL_SOLUTION', 'DATABASE_RVE',
             'DATABASE_FIELD', 'END'}


def _fields(line):
    if ',' in line:
        return [f.strip() or None for f in line.split(',')]
    return line.split()


def _is_numeric_row(line):
    toks = [t for t in _fields(line) if t is not None]
    try:
        [float(t) for t in toks]
    except ValueError:
        return False
    return bool(toks)


def _blocks(text):
    """Yield (keyword, start line, rows, numeric comment rows) in file order.

    Rows are ``(line_no, raw_line)``. Comment lines whose body is purely
    numeric are collected separately so that a card written with its value
    lines commented out (as in the classic listing) can still be recovered.
    """
    current, rows, commented, start = None, [], [], None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith('$'):
            body = line.lstrip()[1:]
            if current is not None and _is_numeric_row(body):
                commented.append((no, body))
            continue
        if line.startswith('*'):
            if current is not None:
                yield current, start, rows, commented
            current = line[1:].strip().upper().replace('-', '_')
            if current not in _KEYWORDS:
                raise DeckError(f"unknown keyword *{line[1:].strip()}", no)
            rows, commented, start = [], [], no
            if current == 'END':
                yield current, start, rows, commented
                return
            continue
        if current is None:
            raise DeckError("data before the first keyword", no)
        rows.append((no, line))
    if current is not None:
        yield current, start, rows, commented


def _num(tok, no, kind=float, what="value"):
    if tok is None:
        return None
    try:
        v = float(tok)
    except ValueError:
        raise DeckError(f"cannot read {what} from {tok!r}", no) from None
    if kind is int:
        if v != int(v):
            raise DeckError(f"{what} must be an integer, got {tok!r}", no)
        return int(v)
    if not math.isfinite(v):
        raise DeckError(f"{what} must be finite", no)
    return v


def _need(vals, n, no, card):
    if len(vals) < n or any(v is None for v in vals[:n]):
        raise DeckError(f"{card} needs {n} fields", no)


def _parse_rve(rows, start):
    if len(rows) < 3:
        raise DeckError("*RVE_ANALYSIS_FEM needs a mesh file line, a flag line "
                        "and an H line", start)
    mesh_file = rows[0][1].strip()
    no, line = rows[1]
    flags = [_num(t, no, int, n) for t, n in
             zip(_fields(line), ('inpt', 'oupt', 'lcid', 'idof', 'bc', 'imatch'))]
    flags += [None] * (6 - len(flags))
    inpt, oupt, lcid, idof, bc, imatch = flags
    inpt = 0 if inpt is None else inpt
    oupt = 1 if oupt is None else oupt
    lcid = 0 if lcid is None else lcid
    bc = 0 if bc is None else bc
    imatch = 1 if imatch is None else imatch
    if inpt != 0:
        raise DeckError("inpt must be 0 (constraints are generated automatically)", no)
    if oupt not in (0, 1):
        raise DeckError("oupt must be 0 or 1", no)
    if idof not in (2, 3):
        raise DeckError("idof must be 2 or 3", no)
    if bc not in (0, 1):
        raise DeckError("bc must be 0 (PDBC) or 1 (LDBC)", no)
    if imatch != 1:
        raise DeckError("imatch must be 1: only PDBC-matching meshes are supported", no)

    H = {}
    for (no, line), slots in zip(rows[2:4], (H_CARD, H_CARD_EXTRA)):
        toks = _fields(line)
        if len(toks) > len(slots):
            raise DeckError(f"too many H entries ({len(toks)})", no)
        for (i, j), tok in zip(slots, toks):
            v = _num(tok, no, float, f"H{i + 1}{j + 1}")
            if v is None:
                continue
            if i >= idof or j >= idof:
                raise DeckError(f"H{i + 1}{j + 1} given for a {idof}D model", no)
            H[(i, j)] = v
    if len(rows) > 4:
        raise DeckError("unexpected extra line in *RVE_ANALYSIS_FEM", rows[4][0])
    if not H:
        raise DeckError("at least one H component must be prescribed", rows[2][0])
    return RVECard(mesh_file, inpt, oupt, lcid, idof, bc, imatch, tuple(sorted(H.items())))


def _parse(text):
    deck = Deck()
    seen = set()
    for kw, start, rows, commented in _blocks(text):
        if kw in ('RVE_ANALYSIS_FEM', 'CONTROL_TERMINATION', 'CONTROL_SOLUTION',
                  'DATABASE_RVE', 'DATABASE_FIELD') and kw in seen:
            raise DeckError(f"*{kw} given twice", start)
        seen.add(kw)
        if kw == 'NODE':
            for no, line in rows:
                toks = _fields(line)
                if len(toks) < 3:
                    raise DeckError("*NODE needs nid, x, y[, z]", no)
                nid = _num(toks[0], no, int, 'node id')
                X = tuple(0.0 if t is None else _num(t, no) for t in toks[1:4])
                X = X + (0.0,) * (3 - len(X))
                deck.nodes.append(Node(nid, X))
        elif kw in ('ELEMENT_SOLID', 'ELEMENT_SHELL'):
            n_en = 8 if kw == 'ELEMENT_SOLID' else 4
            for no, line in rows:
                vals = [_num(t, no, int, 'element field') for t in _fields(line)]
                if len(vals) != n_en + 2 or any(v is None for v in vals):
                    raise DeckError(f"*{kw} needs eid, pid and {n_en} node ids", no)
                deck.elements.append(Element(vals[0], vals[1], tuple(vals[2:])))
        elif kw == 'PART':
            for no, line in rows:
                vals = [_num(t, no, int, 'part field') for t in _fields(line)]
                _need(vals, 2, no, '*PART')
                deck.parts[vals[0]] = vals[1]
        elif kw in ('MAT_ELASTIC', 'MAT_MOONEY_RIVLIN'):
            for no, line in rows:
                toks = _fields(line)
                mid = _num(toks[0] if toks else None, no, int, 'mid')
                vals = [_num(t, no) for t in toks[1:]]
                n = 3 if kw == 'MAT_ELASTIC' else 4
                if mid is None or len(vals) < n or any(v is None for v in vals[1:n]):
                    raise DeckError(f"*{kw} needs mid, ro and {n - 1} constants", no)
                ro = 0.0 if vals[0] is None else vals[0]
                try:
                    model = (LinearElastic(*vals[1:3]) if kw == 'MAT_ELASTIC'
                             else MooneyRivlin(*vals[1:4]))
                except ValueError as exc:
                    raise DeckError(str(exc), no) from None
                deck.mat_cards[mid] = MaterialCard(mid, ro, model)
        elif kw == 'RVE_ANALYSIS_FEM':
            if len(rows) == 1 and commented:
                # flag and H lines present only as comments
                rows = rows + [r for r in commented if r[0] > rows[0][0]]
            deck.rve = _parse_rve(rows, start)
        elif kw == 'DEFINE_CURVE':
            if not rows:
                raise DeckError("*DEFINE_CURVE needs an id line", start)
            lcid = _num(_fields(rows[0][1])[0], rows[0][0], int, 'lcid')
            pts = []
            for no, line in rows[1:]:
                vals = [_num(t, no) for t in _fields(line)]
                _need(vals, 2, no, 'curve point')
                pts.append((vals[0], vals[1]))
            try:
                deck.curves[lcid] = LoadCurve(tuple(pts))
            except ValueError as exc:
                raise DeckError(str(exc), start) from None
        elif kw == 'CONTROL_TERMINATION':
            _need(rows, 1, start, '*CONTROL_TERMINATION')
            no, line = rows[0]
            endtim = _num(_fields(line)[0], no, float, 'endtim')
            if endtim is None or endtim <= 0:
                raise DeckError("endtim must be positive", no)
            deck.end_time = endtim
        elif kw == 'CONTROL_SOLUTION':
            _need(rows, 1, start, '*CONTROL_SOLUTION')
            no, line = rows[0]
            names = (('n_steps', int), ('newton_rtol', float), ('newton_atol', float),
                     ('max_newton_iters', int))
            toks = _fields(line)
            if len(toks) > 5:
                raise DeckError("*CONTROL_SOLUTION takes at most 5 fields", no)
            for (name, kind), tok in zip(names, toks):
                v = _num(tok, no, kind, name)
                if v is not None:
                    deck.controls[name] = v
            if len(toks) == 5 and toks[4] is not None:
                deck.geom_tol = _num(toks[4], no, float, 'geomtol')
                if deck.geom_tol <= 0:
                    raise DeckError("geomtol must be positive", no)
            try:
                SolveControls(**{'n_steps': 1, **deck.controls})
            except ValueError as exc:
                raise DeckError(str(exc), no) from None
        elif kw in ('DATABASE_RVE', 'DATABASE_FIELD'):
            _need(rows, 1, start, f'*{kw}')
            no, line = rows[0]
            dt = _num(_fields(line)[0], no, float, 'dt')
            if dt is None or dt <= 0:
                raise DeckError("output interval must be positive", no)
            if kw == 'DATABASE_RVE':
                deck.dt_rveout = dt
            else:
                deck.dt_field = dt
    for pid, mid in deck.parts.items():
        if mid not in deck.mat_cards:
            raise DeckError(f"part {pid} references undefined material {mid}")
    return deck


def parse_mesh_text(text):
    """Parse a mesh keyword file (nodes, elements, optionally parts/materials)."""
    return _parse(text)


def parse_deck(text):
    """Parse a complete analysis deck.

    Raises
    ------
    DeckError
        Unknown keyword, malformed or missing required card, invalid flag.
    """
    deck = _parse(text)
    if deck.rve is None:
        raise DeckError("missing required card *RVE_ANALYSIS_FEM")
    if deck.rve.lcid and deck.rve.lcid not in deck.curves:
        raise DeckError(f"load curve {deck.rve.lcid} is not defined")
    if not deck.parts:
        raise DeckError("missing required card *PART")
    return deck


def read_deck(path):
    """Read a deck file and merge in its referenced mesh file."""
    with open(path, encoding='utf-8') as fh:
        deck = parse_deck(fh.read())
    if deck.rve.mesh_file and not deck.nodes:
        mesh_path = os.path.join(os.path.dirname(os.path.abspath(path)), deck.rve.mesh_file)
        with open(mesh_path, encoding='utf-8') as fh:
            try:
                mdeck = parse_mesh_text(fh.read())
            except DeckError as exc:
                raise DeckError(f"{deck.rve.mesh_file}: {exc}") from None
        deck.nodes, deck.elements = mdeck.nodes, mdeck.elements
        for pid, mid in mdeck.parts.items():
            deck.parts.setdefault(pid, mid)
        for mid, card in mdeck.mat_cards.items():
            deck.mat_cards.setdefault(mid, card)
    return deck


def build_mesh(deck):
    """Validated :class:`Mesh` from the deck's node/element records."""
    if not deck.nodes or not deck.elements:
        raise DeckError("deck has no mesh (nodes/elements)")
    mesh = load_mesh(deck.nodes, deck.elements)
    if deck.rve is not None and deck.rve.idof != mesh.dimension:
        raise DeckError(f"idof={deck.rve.idof} does not match the "
                        f"{mesh.dimension}D elements of the mesh")
    missing = set(mesh.parts()) - set(deck.parts)
    if missing:
        raise DeckError(f"no *PART definition for part(s) {sorted(missing)}")
    return mesh


# ---------------------------------------------------------------------------
# printing


def _f(v):
    return '' if v is None else repr(float(v))


def _mesh_lines(nodes, elements):
    lines = []
    if nodes:
        lines.append('*NODE')
        for n in nodes:
            X = list(n.X) + [0.0] * (3 - len(n.X))
            lines.append(', '.join([str(n.id)] + [_f(x) for x in X]))
    if elements:
        kw = '*ELEMENT_SOLID' if len(elements[0].connectivity) == 8 else '*ELEMENT_SHELL'
        lines.append(kw)
        for e in elements:
            lines.append(', '.join(str(int(v)) for v in
                                   (e.id, e.part_id, *e.connectivity)))
    return lines


def print_deck(deck):
    """Canonical keyword text; ``parse_deck(print_deck(d)) == d``."""
    lines = []
    for mid, card in sorted(deck.mat_cards.items()):
        m = card.model
        if isinstance(m, LinearElastic):
            lines += ['*MAT_ELASTIC', ', '.join([str(mid), _f(card.ro), _f(m.E), _f(m.nu)])]
        else:
            lines += ['*MAT_MOONEY_RIVLIN',
                      ', '.join([str(mid), _f(card.ro), _f(m.C10), _f(m.C01), _f(m.K)])]
    if deck.parts:
        lines.append('*PART')
        lines += [f'{pid}, {mid}' for pid, mid in sorted(deck.parts.items())]
    if deck.rve is not None:
        r = deck.rve
        H = dict(r.H)
        lines += ['*RVE_ANALYSIS_FEM', r.mesh_file,
                  '$ inpt, oupt, lcid, idof, bc, imatch',
                  ', '.join(str(v) for v in (r.inpt, r.oupt, r.lcid, r.idof, r.bc, r.imatch)),
                  '$ H11, H22, H33, H12, H23, H13',
                  ', '.join(_f(H.get(k)) for k in H_CARD)]
        if any(k in H for k in H_CARD_EXTRA):
            lines += ['$ H21, H32, H31', ', '.join(_f(H.get(k)) for k in H_CARD_EXTRA)]
    for lcid, curve in sorted(deck.curves.items()):
        lines += ['*DEFINE_CURVE', str(lcid)]
        lines += [f'{_f(t)}, {_f(f)}' for t, f in curve.points]
    if deck.end_time is not None:
        lines += ['*CONTROL_TERMINATION', _f(deck.end_time)]
    if deck.controls or deck.geom_tol is not None:
        c = deck.controls
        toks = [str(c['n_steps']) if 'n_steps' in c else '',
                _f(c.get('newton_rtol')), _f(c.get('newton_atol')),
                str(c['max_newton_iters']) if 'max_newton_iters' in c else '']
        if deck.geom_tol is not None:
            toks.append(_f(deck.geom_tol))
        lines += ['*CONTROL_SOLUTION', ', '.join(toks)]
    if deck.dt_rveout is not None:
        lines += ['*DATABASE_RVE', _f(deck.dt_rveout)]
    if deck.dt_field is not None:
        lines += ['*DATABASE_FIELD', _f(deck.dt_field)]
    lines += _mesh_lines(deck.nodes, deck.elements)
    lines.append('*END')
    return '\n'.join(lines) + '\n'


def write_mesh_keyword(mesh, stream, parts=None, mat_cards=None):
    """Write a mesh as *NODE / *ELEMENT_* keyword text."""
    nodes = [Node(int(i), tuple(X)) for i, X in zip(mesh.node_ids, mesh.coords)]
    conn = mesh.connectivity_ids()
    elements = [Element(int(e), int(p), tuple(int(v) for v in c))
                for e, p, c in zip(mesh.element_ids, mesh.part_ids, conn)]
    deck = Deck(nodes=nodes, elements=elements, parts=dict(parts or {}),
                mat_cards=dict(mat_cards or {}))
    stream.write(print_deck(deck))


# ---------------------------------------------------------------------------
# rveout


def format_number(v):
    """Fortran-style ``0.ddddddddddE+xx`` with a mantissa in [0.1, 1)."""
    v = float(v)
    if v == 0.0 or not math.isfinite(v):
        if not math.isfinite(v):
            return ' NaN' if math.isnan(v) else ('-Inf' if v < 0 else ' Inf')
        return '0.0000000000E+00'
    sign = '-' if v < 0 else ''
    mant, exp = f'{abs(v):.9e}'.split('e')
    digits = mant.replace('.', '')
    e = int(exp) + 1
    es = f'{abs(e):02d}'
    return f"{sign}0.{digits}E{'-' if e < 0 else '+'}{es}"


_ORDER6 = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))
_ORDER_REST = ((1, 0), (2, 1), (0, 2))


def _as3(T, fill_diag):
    T = np.asarray(T, float)
    if T.shape == (3, 3):
        return T
    out = np.zeros((3, 3))
    out[:2, :2] = T
    out[2, 2] = fill_diag
    return out


def _fields_line(label, T, order):
    return '  '.join(f'{label}{i + 1}{j + 1}= {format_number(T[i, j])}' for i, j in order)


def write_rveout(records, stream, zero_tol=1e-10):
    """Write homogenized records in rveout layout.

    Entries with ``|v| <= zero_tol * max|T|`` of their tensor ``T`` are
    printed as exact zeros (``zero_tol=0`` prints raw values). 2D records are
    embedded in 3x3: F33 = 1, E33 = 0, P33 the out-of-plane plane-strain
    average.
    """
    if not records:
        raise ValueError("no records to write")
    for rec in records:
        tensors = [('F', _as3(rec.F_bar, 1.0)), ('E', _as3(rec.E_bar, 0.0)),
                   ('P', _as3(rec.P_bar, rec.P33_bar or 0.0))]
        if zero_tol:
            tensors = [(lab, np.where(np.abs(T) <= zero_tol * np.abs(T).max(), 0.0, T))
                       for lab, T in tensors]
        stream.write(f'time= {format_number(rec.time)}\n')
        stream.write('deformation gradient F, Green strain E, PK1 stress P\n')
        for label, T in tensors:
            stream.write(_fields_line(label, T, _ORDER6) + '\n')
        stream.write('  '.join(_fields_line(label, T, _ORDER_REST)
                               for label, T in tensors) + '\n')


_FIELD_RE = re.compile(r'([FEP])(\d)(\d)=\s*(-?\d\.\d+E[+-]\d+)')


def parse_rveout(text):
    """Read an rveout file back into a list of dicts with 3x3 F, E, P."""
    out = []
    cur = None
    for line in text.splitlines():
        if line.startswith('time='):
            cur = {'time': float(line.split('=', 1)[1]),
                   'F': np.zeros((3, 3)), 'E': np.zeros((3, 3)), 'P': np.zeros((3, 3))}
            out.append(cur)
            continue
        for lab, i, j, num in _FIELD_RE.findall(line):
            cur[lab][int(i) - 1, int(j) - 1] = float(num)
    return out


# ---------------------------------------------------------------------------
# field snapshots


def von_mises(sigma, sigma33=None):
    """Von Mises stress from Cauchy stress arrays (..., d, d)."""
    s = np.asarray(sigma, float)
    if s.shape[-1] == 2:
        s3 = np.zeros(s.shape[:-2] + (3, 3))
        s3[..., :2, :2] = s
        if sigma33 is not None:
            s3[..., 2, 2] = sigma33
        s = s3
    dev = s - np.trace(s, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3
    return np.sqrt(1.5 * np.einsum('...ij,...ij->...', dev, dev))


def write_field_snapshot(mesh, field_state, time, path, wdetJ=None):
    """Legacy ASCII VTK unstructured grid with displacements and von Mises."""
    from . import _elements
    if wdetJ is None:
        _, _, wdetJ = _elements.reference_geometry(mesh.coords, mesh.conn)
    qp = field_state.qp_states
    vm_qp = von_mises(qp.sigma, qp.sigma33)
    vm = np.sum(vm_qp * wdetJ, axis=1) / wdetJ.sum(axis=1)
    n, ne = mesh.n_nodes, mesh.n_elements
    n_en = mesh.conn.shape[1]
    X = np.zeros((n, 3))
    X[:, :mesh.dimension] = mesh.coords
    U = np.zeros((n, 3))
    U[:, :mesh.dimension] = field_state.w_total
    ctype = _elements.VTK_CELL_TYPE[mesh.dimension]
    lines = ['# vtk DataFile Version 3.0',
             f'rvefem field t={format_number(time)}',
             'ASCII',
             'DATASET UNSTRUCTURED_GRID',
             f'POINTS {n} double']
    lines += [f'{a:.12e} {b:.12e} {c:.12e}' for a, b, c in X]
    lines.append(f'CELLS {ne} {ne * (n_en + 1)}')
    lines += [f'{n_en} ' + ' '.join(str(int(v)) for v in c) for c in mesh.conn]
    lines.append(f'CELL_TYPES {ne}')
    lines += [str(ctype)] * ne
    lines += [f'POINT_DATA {n}', 'VECTORS displacement double']
    lines += [f'{a:.12e} {b:.12e} {c:.12e}' for a, b, c in U]
    lines += [f'CELL_DATA {ne}', 'SCALARS von_mises double 1', 'LOOKUP_TABLE default']
    lines += [f'{v:.12e}' for v in vm]
    lines += ['SCALARS part_id int 1', 'LOOKUP_TABLE default']
    lines += [str(int(p)) for p in mesh.part_ids]
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            fh.write('\n'.join(lines) + '\n')
    except OSError as exc:
        raise OSError(f"cannot write field snapshot {path}: {exc.strerror or exc}") from exc
    return vm
