"""Polynomial center-manifold approximation and reduced dynamics.

For a split system ``z1' = A1 z1 + g1``, ``z2' = A2 z2 + g2`` the center
manifold ``z2 = eta(z1)`` satisfies::

    A2 eta(y) + g2(y, eta(y)) - D eta(y) (A1 y + g1(y, eta(y))) = 0

``eta`` is built one homogeneous degree at a time: the degree-``p`` part
solves a linear (homological) equation whose right-hand side only involves
lower-degree parts already computed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import NoCenterBlockError, ResonanceError
from .poly import Poly, PolySystem, compose, homogeneous_basis
from .transform import SplitSystem

__all__ = [
    "CenterManifold",
    "ReducedSystem",
    "approximate_eta",
    "reduce",
    "pde_residual",
]

#: Reciprocal condition number below which a homological system is singular.
RCOND_MIN = 1e-12


@dataclass(frozen=True)
class CenterManifold:
    eta: tuple[Poly, ...]
    degree: int
    residual_norm: float

    @property
    def k(self) -> int:
        return self.eta[0].n if self.eta else 0

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "eta": [p.to_json() for p in self.eta],
            "degree": self.degree,
            "residual": self.residual_norm,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> CenterManifold:
        k = int(data["k"])
        return cls(
            tuple(Poly.from_json(k, e) for e in data["eta"]),
            int(data["degree"]),
            float(data["residual"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class ReducedSystem:
    system: PolySystem
    degree: int

    def to_json(self) -> dict:
        return {"degree": self.degree, **self.system.to_json()}


def _linear_field(M: np.ndarray, k: int) -> list[Poly]:
    return [
        Poly(k, {tuple(int(c == j) for c in range(k)): M[i, j] for j in range(k)})
        for i in range(M.shape[0])
    ]


def _center_field(split_sys: SplitSystem, eta: Sequence[Poly], cap: int) -> list[Poly]:
    """``A1 y + g1(y, eta(y))`` truncated at ``cap``."""
    k = split_sys.k
    subs = _substitution(k, eta)
    lin = _linear_field(split_sys.A1, k)
    return [
        (l + compose(g, subs, cap)).truncate(cap) for l, g in zip(lin, split_sys.g1)
    ]


def _substitution(k: int, eta: Sequence[Poly]) -> list[Poly]:
    return [Poly.variable(k, i) for i in range(k)] + list(eta)


def _residual(split_sys: SplitSystem, eta: Sequence[Poly], cap: int) -> list[Poly]:
    k = split_sys.k
    subs = _substitution(k, eta)
    center = _center_field(split_sys, eta, cap)
    out = []
    A2 = split_sys.A2
    for i, g in enumerate(split_sys.g2):
        acc = compose(g, subs, cap)
        for j, e in enumerate(eta):
            if A2[i, j] != 0.0:
                acc = acc + e * A2[i, j]
        grad = eta[i].gradient()
        for l in range(k):
            if not grad[l].is_zero():
                acc = acc - (grad[l] * center[l]).truncate(cap)
        out.append(acc.truncate(cap))
    return out


def pde_residual(split_sys: SplitSystem, cm: CenterManifold, degree_cap: int) -> list[Poly]:
    """Invariance-equation residual of ``cm``, truncated at ``degree_cap``."""
    return _residual(split_sys, cm.eta, degree_cap)


def approximate_eta(split_sys: SplitSystem, m: int) -> CenterManifold:
    """Taylor coefficients of the center manifold up to total degree ``m``.

    Raises
    ------
    NoCenterBlockError
        If the split has no center directions.
    ResonanceError
        If the homological equation at some degree is singular.
    """
    k, n = split_sys.k, split_sys.n
    if k == 0:
        raise NoCenterBlockError("NoCenterBlock: no center directions to reduce onto")
    if m < 2:
        raise ValueError(f"approximation degree must be >= 2, got {m}")
    s = n - k
    A1, A2 = split_sys.A1, split_sys.A2
    eta = [Poly.zero(k) for _ in range(s)]
    if s == 0:
        return CenterManifold((), m, 0.0)

    for p in range(2, m + 1):
        monos = homogeneous_basis(k, p)
        index = {mono: i for i, mono in enumerate(monos)}
        nm = len(monos)
        # degree-p part of the residual with the degree-p coefficients at zero
        rhs_polys = [r.homogeneous_part(p) for r in _residual(split_sys, eta, p)]
        rhs = np.zeros(s * nm)
        for i, r in enumerate(rhs_polys):
            for mono, c in r.items():
                rhs[i * nm + index[mono]] = c

        # linear operator c -> A2 c(y) - D c(y) A1 y on homogeneous degree p
        lin = _linear_field(A1, k)
        L = np.zeros((s * nm, s * nm))
        for j in range(s):
            for a, mono in enumerate(monos):
                basis_poly = Poly.monomial(mono)
                col = j * nm + a
                for i in range(s):
                    if A2[i, j] != 0.0:
                        L[i * nm + a, col] += A2[i, j]
                grad = basis_poly.gradient()
                dmono = Poly.zero(k)
                for l in range(k):
                    dmono = dmono + grad[l] * lin[l]
                for mm, c in dmono.items():
                    L[j * nm + index[mm], col] -= c
        rcond = 1.0 / np.linalg.cond(L) if np.all(np.isfinite(L)) else 0.0
        if not np.isfinite(rcond) or rcond < RCOND_MIN:
            raise ResonanceError(
                p, f"homological equation at degree {p} is singular (rcond {rcond:.2e})"
            )
        coeffs = np.linalg.solve(L, -rhs)
        for i in range(s):
            part = Poly(k, {mono: coeffs[i * nm + a] for a, mono in enumerate(monos)})
            eta[i] = eta[i] + part

    res = _residual(split_sys, eta, m)
    norm = max((r.max_abs_coeff() for r in res), default=0.0)
    return CenterManifold(tuple(eta), m, float(norm))


def reduce(split_sys: SplitSystem, cm: CenterManifold) -> ReducedSystem:
    """Dynamics on the approximate manifold: ``y' = A1 y + g1(y, eta(y))``."""
    deg_g1 = max((g.degree for g in split_sys.g1), default=0)
    cap = cm.degree + max(deg_g1, 0)
    field = _center_field(split_sys, cm.eta, cap)
    return ReducedSystem(PolySystem(field), cap)
