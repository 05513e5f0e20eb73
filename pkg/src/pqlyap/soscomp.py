"""Compile SOS Lyapunov searches into standard-form SDP feasibility problems.

Two parametrisations are supported:

* ``full``: ``V`` is a general polynomial of degree ``2d`` in all ``n``
  variables.
* ``partial``: ``V(x1, x2) = J(x1) + x2^T H(x1) + x2^T P x2`` where ``x1``
  are the ``k`` center coordinates and ``P`` is a shifted PSD matrix.

Both emit three coefficient-matching identities::

    V(0) = 0
    V - s1 - eps * |x|^2                          == 0
    -grad(V) . f - s2 * (R^2 - |x|^2) - s3        == 0

with ``s1, s2, s3`` represented by Gram matrices over monomial bases.

Variable numbering: free scalars come first (ids ``0 .. free_vars - 1``),
then each PSD block contributes its upper triangle in row-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import ceil, comb
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DegreeError, MalformedProblemError, NoCenterBlockError
from .poly import ZERO_TOL, Monomial, Poly, PolySystem, monomial_basis, monomial_key
from .transform import SplitSystem

__all__ = [
    "DEFAULT_RADIUS",
    "DEFAULT_EPSILON",
    "DEFAULT_P_SHIFT",
    "GramBlock",
    "EqConstraint",
    "SdpProblem",
    "VarCount",
    "s3_basis_degree",
    "compile_full",
    "compile_partial",
    "count_vars",
    "gram_poly",
    "assemble_v",
]

DEFAULT_RADIUS = 0.1
DEFAULT_EPSILON = 0.1
#: Lower bound on the eigenvalues of ``P`` in the partial form.
DEFAULT_P_SHIFT = 1e-6


def _tri(m: int) -> int:
    return m * (m + 1) // 2


@dataclass(frozen=True)
class GramBlock:
    """Symmetric PSD matrix variable indexed by a monomial basis.

    The polynomial it represents is ``z^T (Q + shift * I) z`` where ``z`` is
    the basis vector and ``Q`` the block variable.
    """

    basis: tuple[Monomial, ...]
    role: str
    shift: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def n_entries(self) -> int:
        return _tri(self.dim)

    def entries(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.dim) for j in range(i, self.dim)]


@dataclass(frozen=True)
class EqConstraint:
    terms: tuple[tuple[int, float], ...]
    rhs: float
    label: str = ""


@dataclass(frozen=True)
class SdpProblem:
    """Feasibility problem: find free scalars and PSD blocks meeting ``eq``."""

    psd_blocks: tuple[GramBlock, ...]
    free_vars: int
    eq: tuple[EqConstraint, ...]
    meta: dict[str, Any] = field(default_factory=dict)
    #: ``(role, monomial)`` for every free scalar, in id order.
    free_layout: tuple[tuple[str, Monomial], ...] = ()

    @property
    def n_vars(self) -> int:
        return self.free_vars + sum(b.n_entries for b in self.psd_blocks)

    def block_offsets(self) -> list[int]:
        offsets, pos = [], self.free_vars
        for b in self.psd_blocks:
            offsets.append(pos)
            pos += b.n_entries
        return offsets

    def block(self, role: str) -> GramBlock:
        for b in self.psd_blocks:
            if b.role == role:
                return b
        raise KeyError(role)

    def check(self) -> None:
        """Raise :class:`MalformedProblemError` if any row is out of range."""
        if len(self.free_layout) not in (0, self.free_vars):
            raise MalformedProblemError("free_layout length does not match free_vars")
        nv = self.n_vars
        for r, row in enumerate(self.eq):
            for vid, c in row.terms:
                if not 0 <= vid < nv:
                    raise MalformedProblemError(f"row {r} references undeclared variable {vid}")
                if not np.isfinite(c):
                    raise MalformedProblemError(f"row {r} has a non-finite coefficient")
            if not np.isfinite(row.rhs):
                raise MalformedProblemError(f"row {r} has a non-finite right-hand side")

    # -- JSON ----------------------------------------------------------------
    def to_json(self) -> dict:
        meta = dict(self.meta)
        meta["free_layout"] = [[role, list(m)] for role, m in self.free_layout]
        return {
            "psd_blocks": [
                {"role": b.role, "dim": b.dim, "shift": b.shift, "basis": [list(m) for m in b.basis]}
                for b in self.psd_blocks
            ],
            "free_vars": self.free_vars,
            "eq": [
                {"terms": [[v, c] for v, c in row.terms], "rhs": row.rhs, "label": row.label}
                for row in self.eq
            ],
            "meta": meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: Mapping) -> SdpProblem:
        meta = dict(data.get("meta", {}))
        layout = tuple((role, tuple(m)) for role, m in meta.pop("free_layout", []))
        blocks = []
        for b in data["psd_blocks"]:
            basis = tuple(tuple(m) for m in b.get("basis", []))
            if not basis:
                # schema-minimal blocks carry only a dimension
                basis = tuple((i,) for i in range(int(b["dim"])))
            if len(basis) != int(b["dim"]):
                raise MalformedProblemError(f"block {b['role']} basis/dim mismatch")
            blocks.append(GramBlock(basis, b["role"], float(b.get("shift", 0.0))))
        eq = tuple(
            EqConstraint(
                tuple((int(v), float(c)) for v, c in row["terms"]),
                float(row["rhs"]),
                row.get("label", ""),
            )
            for row in data["eq"]
        )
        prob = cls(tuple(blocks), int(data["free_vars"]), eq, meta, layout)
        prob.check()
        return prob

    @classmethod
    def loads(cls, text: str) -> SdpProblem:
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class VarCount:
    n: int
    k: int
    d: int
    full_count: int
    partial_count: int


# -- identity builder ---------------------------------------------------------

class _Identity:
    """Accumulates ``sum_v c_v(x) * var_v + const(x) == 0`` coefficient-wise."""

    def __init__(self, label: str):
        self.label = label
        self.rows: dict[Monomial, dict[int, float]] = {}
        self.const: dict[Monomial, float] = {}

    def add_var(self, vid: int, terms) -> None:
        for m, c in terms:
            row = self.rows.setdefault(m, {})
            row[vid] = row.get(vid, 0.0) + c

    def add_const(self, terms) -> None:
        for m, c in terms:
            self.const[m] = self.const.get(m, 0.0) + c

    def emit(self) -> list[EqConstraint]:
        out = []
        for m in sorted(set(self.rows) | set(self.const), key=monomial_key):
            row = {v: c for v, c in self.rows.get(m, {}).items() if abs(c) >= ZERO_TOL}
            rhs = -self.const.get(m, 0.0)
            if abs(rhs) < ZERO_TOL:
                rhs = 0.0
            if not row and rhs == 0.0:
                continue
            out.append(EqConstraint(tuple(sorted(row.items())), rhs, f"{self.label}:{list(m)}"))
        return out


def _shift(m: Monomial, i: int, by: int = 1) -> Monomial:
    e = list(m)
    e[i] += by
    return tuple(e)


def _gram_terms(block: GramBlock, i: int, j: int) -> list[tuple[Monomial, float]]:
    mono = tuple(a + b for a, b in zip(block.basis[i], block.basis[j]))
    return [(mono, 1.0 if i == j else 2.0)]


def _ball_terms(mono: Monomial, mult: float, R: float) -> list[tuple[Monomial, float]]:
    # terms of mult * x^mono * (R^2 - |x|^2)
    out = [(mono, mult * R * R)]
    for l in range(len(mono)):
        out.append((_shift(mono, l, 2), -mult))
    return out


def _neg_lie(terms: Poly | list, f: Sequence[Poly]) -> list[tuple[Monomial, float]]:
    """Terms of ``-grad(p) . f`` for ``p`` given as ``(monomial, coeff)`` pairs."""
    acc: dict[Monomial, float] = {}
    items = terms.items() if isinstance(terms, Poly) else terms
    for m, c in items:
        for i, e in enumerate(m):
            if not e:
                continue
            dm = _shift(m, i, -1)
            for fm, fc in f[i].items():
                mono = tuple(a + b for a, b in zip(dm, fm))
                acc[mono] = acc.get(mono, 0.0) - c * e * fc
    return list(acc.items())


def s3_basis_degree(d: int, v_degree: int | None, f_degree: int) -> int:
    """Half-degree of the ``s3`` Gram basis.

    The decrease identity contains ``grad(V) . f`` (degree ``2d - 1 + deg f``)
    and ``s2 * (R^2 - |x|^2)`` (degree ``2d + 2``); ``s3`` must be able to
    match the larger.
    """
    v_degree = 2 * d if v_degree is None else v_degree
    return ceil(max(v_degree - 1 + f_degree, 2 * d + 2) / 2)


def _check_args(d: int, R: float, eps: float) -> None:
    if d < 1:
        raise ValueError(f"degree d must be >= 1, got {d}")
    if R <= 0 or eps <= 0:
        raise ValueError("radius and epsilon must be positive")


def _resolve_s3(d: int, f_degree: int, s3_degree: int | None) -> int:
    need = s3_basis_degree(d, None, f_degree)
    if s3_degree is None:
        return need
    if s3_degree < need:
        raise DegreeError(
            f"s3 basis degree {s3_degree} cannot match the decrease identity; "
            f"required s3 degree is {need} (polynomial degree {2 * need})"
        )
    return s3_degree


def _multiplier_blocks(n: int, d: int, d3: int) -> list[GramBlock]:
    # V(0) = 0 forces s1(0) = 0, and then s2(0) = s3(0) = 0 at the origin of
    # the decrease identity; a PSD Gram matrix with a zero diagonal entry has
    # a zero row, so the constant monomial is dropped from every basis.
    half = tuple(monomial_basis(n, d)[1:])
    return [
        GramBlock(half, "s1"),
        GramBlock(half, "s2"),
        GramBlock(tuple(monomial_basis(n, d3)[1:]), "s3"),
    ]


def _finish(
    n: int,
    f: Sequence[Poly],
    R: float,
    eps: float,
    v_parts: list[tuple[int, list[tuple[Monomial, float]]]],
    v_const: list[tuple[Monomial, float]],
    blocks: list[GramBlock],
    free_vars: int,
    layout: list[tuple[str, Monomial]],
    meta: dict,
) -> SdpProblem:
    """Emit the three identities given V's linear parametrisation.

    ``v_parts`` lists ``(var_id, terms)`` with ``V = sum var * terms + v_const``.
    """
    offsets, pos = {}, free_vars
    for b in blocks:
        offsets[b.role] = pos
        pos += b.n_entries

    zero = (0,) * n
    origin = _Identity("V(0)")
    for vid, terms in v_parts:
        origin.add_var(vid, [(m, c) for m, c in terms if m == zero])
    origin.add_const([(m, c) for m, c in v_const if m == zero])

    positivity = _Identity("V-s1")
    decrease = _Identity("dV")
    for vid, terms in v_parts:
        positivity.add_var(vid, terms)
        decrease.add_var(vid, _neg_lie(terms, f))
    positivity.add_const(v_const)
    decrease.add_const(_neg_lie(v_const, f))
    positivity.add_const([(_shift(zero, i, 2), -eps) for i in range(n)])

    for b in blocks:
        off = offsets[b.role]
        for e, (i, j) in enumerate(b.entries()):
            vid = off + e
            if b.role == "s1":
                positivity.add_var(vid, [(m, -c) for m, c in _gram_terms(b, i, j)])
            elif b.role == "s2":
                (m, c), = _gram_terms(b, i, j)
                decrease.add_var(vid, _ball_terms(m, -c, R))
            elif b.role == "s3":
                decrease.add_var(vid, [(m, -c) for m, c in _gram_terms(b, i, j)])

    eq = tuple(origin.emit() + positivity.emit() + decrease.emit())
    prob = SdpProblem(tuple(blocks), free_vars, eq, meta, tuple(layout))
    prob.check()
    return prob


def compile_full(
    sys: PolySystem,
    d: int,
    R: float = DEFAULT_RADIUS,
    eps: float = DEFAULT_EPSILON,
    s3_degree: int | None = None,
) -> SdpProblem:
    """Full SOS Lyapunov search over all polynomials of degree ``2d``."""
    _check_args(d, R, eps)
    n = sys.n
    fdeg = max(sys.degree, 1)
    d3 = _resolve_s3(d, fdeg, s3_degree)
    vbasis = monomial_basis(n, 2 * d)
    v_parts = [(i, [(m, 1.0)]) for i, m in enumerate(vbasis)]
    layout = [("V", m) for m in vbasis]
    meta = {
        "form": "Full", "degree": d, "radius": R, "epsilon": eps,
        "n": n, "k": None, "f_degree": fdeg, "s3_degree": d3,
    }
    return _finish(
        n, sys.f, R, eps, v_parts, [], _multiplier_blocks(n, d, d3),
        len(vbasis), layout, meta,
    )


def compile_partial(
    split_sys: SplitSystem,
    d: int,
    R: float = DEFAULT_RADIUS,
    eps: float = DEFAULT_EPSILON,
    p_shift: float = DEFAULT_P_SHIFT,
    s3_degree: int | None = None,
) -> SdpProblem:
    """Partially quadratic search in the split coordinates ``(z1, z2)``.

    ``J`` and each ``H_i`` range over polynomials of degree ``2d`` in the
    ``k`` center coordinates; ``P`` is an ``(n-k)``-dimensional PSD block
    shifted by ``p_shift * I``.
    """
    _check_args(d, R, eps)
    k, n = split_sys.k, split_sys.n
    if k == 0:
        raise NoCenterBlockError("NoCenterBlock: k = 0, use compile_full instead")
    f = split_sys.field.f
    fdeg = max(split_sys.field.degree, 1)
    d3 = _resolve_s3(d, fdeg, s3_degree)
    center = [tuple(m) + (0,) * (n - k) for m in monomial_basis(k, 2 * d)]

    v_parts, layout = [], []
    for m in center:
        v_parts.append((len(layout), [(m, 1.0)]))
        layout.append(("J", m))
    for i in range(n - k):
        for m in center:
            v_parts.append((len(layout), [(_shift(m, k + i), 1.0)]))
            layout.append((f"H{i + 1}", m))
    free_vars = len(layout)

    blocks: list[GramBlock] = []
    v_const: list[tuple[Monomial, float]] = []
    if n > k:
        zero = (0,) * n
        pblock = GramBlock(tuple(_shift(zero, k + i) for i in range(n - k)), "P", p_shift)
        blocks.append(pblock)
        vid = free_vars
        for i, j in pblock.entries():
            v_parts.append((vid, _gram_terms(pblock, i, j)))
            vid += 1
        v_const = [(_shift(zero, k + i, 2), p_shift) for i in range(n - k)]
    blocks.extend(_multiplier_blocks(n, d, d3))

    meta = {
        "form": "Partial", "degree": d, "radius": R, "epsilon": eps,
        "n": n, "k": k, "f_degree": fdeg, "s3_degree": d3, "p_shift": p_shift,
    }
    return _finish(n, f, R, eps, v_parts, v_const, blocks, free_vars, layout, meta)


def count_vars(n: int, k: int, d: int, f_degree: int = 2) -> VarCount:
    """Closed-form scalar-variable totals of both compilations.

    ``f_degree`` is the degree of the vector field, which fixes the ``s3``
    basis; the default matches quadratic vector fields.
    """
    if not 0 <= k <= n or d < 1:
        raise ValueError(f"need 0 <= k <= n and d >= 1, got n={n}, k={k}, d={d}")
    d3 = s3_basis_degree(d, None, max(f_degree, 1))
    mult = 2 * _tri(comb(n + d, d) - 1) + _tri(comb(n + d3, d3) - 1)
    full = comb(n + 2 * d, 2 * d) + mult
    if k == 0:
        partial = full  # partial search is undefined; report the full problem
    else:
        poly_block = comb(k + 2 * d, 2 * d)
        partial = (n - k + 1) * poly_block + _tri(n - k) + mult
    return VarCount(n, k, d, full, partial)


# -- reading solutions back -----------------------------------------------------

def gram_poly(block: GramBlock, Q: np.ndarray, n: int) -> Poly:
    """The polynomial ``z^T (Q + shift I) z`` for a block value ``Q``."""
    Q = np.asarray(Q, dtype=float) + block.shift * np.eye(block.dim)
    terms: dict[Monomial, float] = {}
    for i, j in block.entries():
        (m, c), = _gram_terms(block, i, j)
        terms[m] = terms.get(m, 0.0) + c * Q[i, j]
    return Poly(n, terms)


def assemble_v(prob: SdpProblem, free_values: Sequence[float], psd_values: Sequence[np.ndarray]) -> Poly:
    """Lyapunov candidate encoded by a variable assignment."""
    n = prob.meta["n"]
    terms: dict[Monomial, float] = {}
    k = prob.meta.get("k")
    for (role, m), v in zip(prob.free_layout, free_values):
        if role.startswith("H"):
            m = _shift(m, k + int(role[1:]) - 1)
        terms[m] = terms.get(m, 0.0) + float(v)
    V = Poly(n, terms)
    for b, Q in zip(prob.psd_blocks, psd_values):
        if b.role == "P":
            V = V + gram_poly(b, Q, n)
    return V
