"""Coordinate change into coupled center/stable form.

With ``z = T x`` the vector field becomes ``z' = T f(T^-1 z)``; its linear
part is ``diag(A1, A2)`` and the rest is collected into ``g1`` (first ``k``
rows) and ``g2`` (remaining rows).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import Poly, PolySystem, linear_substitute
from .spectral import BlockSplit, block_diagonalize, linearize

__all__ = ["SplitSystem", "split_system", "transform_field"]


def transform_field(sys: PolySystem, T: np.ndarray) -> PolySystem:
    """Vector field of ``z = T x``."""
    T = np.asarray(T, dtype=float)
    T_inv = np.linalg.inv(T)
    substituted = [linear_substitute(fi, T_inv) for fi in sys.f]
    n = sys.n
    comps = []
    for i in range(n):
        acc = Poly.zero(n)
        for j in range(n):
            if T[i, j] != 0.0:
                acc = acc + substituted[j] * T[i, j]
        comps.append(acc)
    return PolySystem(comps)


@dataclass(frozen=True)
class SplitSystem:
    """A system in coupled form ``z1' = A1 z1 + g1``, ``z2' = A2 z2 + g2``.

    ``field`` is the full transformed vector field in ``z``; ``g1``/``g2``
    are obtained by removing the block-diagonal linear part.
    """

    split: BlockSplit
    field: PolySystem

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def k(self) -> int:
        return self.split.k

    @property
    def A1(self) -> np.ndarray:
        return self.split.A1

    @property
    def A2(self) -> np.ndarray:
        return self.split.A2

    @property
    def T(self) -> np.ndarray:
        return self.split.T

    def _linear_rows(self) -> list[Poly]:
        D = self.split.block_matrix()
        n = self.n
        rows = []
        for i in range(n):
            rows.append(
                Poly(n, {tuple(int(c == j) for c in range(n)): D[i, j] for j in range(n)})
            )
        return rows

    @property
    def g(self) -> list[Poly]:
        return [fi - li for fi, li in zip(self.field.f, self._linear_rows())]

    @property
    def g1(self) -> list[Poly]:
        return self.g[: self.k]

    @property
    def g2(self) -> list[Poly]:
        return self.g[self.k :]


def split_system(sys: PolySystem, tol: float | None = None) -> SplitSystem:
    """Block-diagonalise the linearisation and transform ``sys`` accordingly."""
    split = block_diagonalize(linearize(sys), tol)
    field = sys if np.array_equal(split.T, np.eye(sys.n)) else transform_field(sys, split.T)
    return SplitSystem(split, field)
