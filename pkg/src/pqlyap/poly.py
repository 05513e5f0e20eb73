"""Sparse multivariate polynomials over float64 coefficients.

A :class:`Poly` maps exponent tuples to coefficients.  Terms are kept in
graded-lexicographic order (total degree first, then ``x1 > x2 > ...``) so
that every consumer that indexes monomials gets a deterministic layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ZERO_TOL",
    "Monomial",
    "Poly",
    "PolySystem",
    "monomial_basis",
    "monomial_key",
    "add",
    "mul",
    "scale",
    "gradient",
    "evaluate",
    "linear_substitute",
    "compose",
]

#: Coefficients with magnitude below this are dropped after arithmetic.
ZERO_TOL = 1e-14

Monomial = tuple[int, ...]

_SCALARS = (int, float, np.integer, np.floating)


def monomial_key(exps: Sequence[int]) -> tuple:
    """Sort key realising graded-lex order."""
    return (sum(exps), tuple(-e for e in exps))


def _exponents_of_degree(n: int, deg: int) -> list[Monomial]:
    # lex-descending enumeration of exponent vectors with a fixed total degree
    if n == 1:
        return [(deg,)]
    out = []
    for first in range(deg, -1, -1):
        for rest in _exponents_of_degree(n - 1, deg - first):
            out.append((first,) + rest)
    return out


def monomial_basis(n: int, d: int) -> list[Monomial]:
    """All monomials in ``n`` variables of total degree at most ``d``.

    The list is in graded-lex order and has ``comb(n + d, d)`` entries.

    >>> monomial_basis(2, 1)
    [(0, 0), (1, 0), (0, 1)]
    """
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    basis: list[Monomial] = []
    for deg in range(d + 1):
        basis.extend(_exponents_of_degree(n, deg))
    assert len(basis) == comb(n + d, d)
    return basis


def homogeneous_basis(n: int, deg: int) -> list[Monomial]:
    """Monomials of total degree exactly ``deg`` in graded-lex order."""
    return _exponents_of_degree(n, deg) if deg >= 0 else []


class Poly:
    """Immutable sparse polynomial in ``n`` variables.

    Parameters
    ----------
    n
        Number of variables.
    terms
        Mapping from exponent tuples to coefficients.  Coefficients below
        :data:`ZERO_TOL` in magnitude are discarded.
    """

    __slots__ = ("_n", "_terms")

    def __init__(self, n: int, terms: Mapping[Sequence[int], float] | None = None):
        if n < 1:
            raise ValueError(f"polynomial dimension must be >= 1, got {n}")
        clean: dict[Monomial, float] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise ValueError(f"monomial {exps} does not have length {n}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = float(c)
            if abs(c) >= ZERO_TOL:
                clean[exps] = clean.get(exps, 0.0) + c
        self._n = n
        self._terms = {
            m: clean[m]
            for m in sorted(clean, key=monomial_key)
            if abs(clean[m]) >= ZERO_TOL
        }

    # -- construction -----------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> Poly:
        return cls(n)

    @classmethod
    def constant(cls, n: int, c: float) -> Poly:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> Poly:
        """The coordinate polynomial ``x_i`` (0-based)."""
        exps = [0] * n
        exps[i] = 1
        return cls(n, {tuple(exps): 1.0})

    @classmethod
    def monomial(cls, exps: Sequence[int], coeff: float = 1.0) -> Poly:
        return cls(len(exps), {tuple(exps): coeff})

    @classmethod
    def _raw(cls, n: int, terms: dict[Monomial, float]) -> Poly:
        # terms already validated; still canonicalise
        obj = cls.__new__(cls)
        obj._n = n
        obj._terms = {
            m: terms[m] for m in sorted(terms, key=monomial_key) if abs(terms[m]) >= ZERO_TOL
        }
        return obj

    # -- accessors ----------------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, exps: Sequence[int]) -> float:
        return self._terms.get(tuple(exps), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(m) for m in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, tuple(self._terms.items())))

    def __repr__(self) -> str:
        if not self._terms:
            return f"Poly({self._n}, 0)"
        parts = []
        for m, c in self._terms.items():
            mono = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(m) if e
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return f"Poly({self._n}, {' '.join(parts)})"

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: Poly):
        if other._n != self._n:
            raise ValueError(f"dimension mismatch: {self._n} vs {other._n}")

    def __add__(self, other):
        if isinstance(other, _SCALARS):
            other = Poly.constant(self._n, other)
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly._raw(self._n, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self._n, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, _SCALARS):
            other = Poly.constant(self._n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            c = float(other)
            return Poly._raw(self._n, {m: c * v for m, v in self._terms.items()})
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        out: dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0.0) + c1 * c2
        return Poly._raw(self._n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Poly:
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = Poly.constant(self._n, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- calculus and evaluation -----------------------------------------
    def diff(self, i: int) -> Poly:
        out: dict[Monomial, float] = {}
        for m, c in self._terms.items():
            if m[i]:
                dm = list(m)
                dm[i] -= 1
                out[tuple(dm)] = c * m[i]
        return Poly._raw(self._n, out)

    def gradient(self) -> list[Poly]:
        return [self.diff(i) for i in range(self._n)]

    def __call__(self, x: Sequence[float]) -> float:
        return self.eval(x)

    def eval(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self._n,):
            raise ValueError(f"expected a point of length {self._n}, got shape {x.shape}")
        total = 0.0
        for m, c in self._terms.items():
            v = c
            for xi, e in zip(x, m):
                if e:
                    v *= xi**e
            total += v
        return float(total)

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at the rows of ``X`` (shape ``(N, n)``)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self._n:
            raise ValueError(f"expected points with {self._n} columns, got {X.shape[1]}")
        if not self._terms:
            return np.zeros(X.shape[0])
        exps = np.array(list(self._terms), dtype=int)
        coeffs = np.array(list(self._terms.values()))
        maxdeg = int(exps.max())
        # powers[p, :, i] = X[:, i] ** p
        powers = np.ones((maxdeg + 1,) + X.shape)
        for p in range(1, maxdeg + 1):
            powers[p] = powers[p - 1] * X
        cols = np.arange(self._n)
        mono = np.prod(powers[exps, :, cols].transpose(0, 2, 1), axis=2)
        return mono.T @ coeffs

    def truncate(self, max_degree: int) -> Poly:
        return Poly._raw(
            self._n, {m: c for m, c in self._terms.items() if sum(m) <= max_degree}
        )

    def homogeneous_part(self, deg: int) -> Poly:
        return Poly._raw(self._n, {m: c for m, c in self._terms.items() if sum(m) == deg})

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def embed(self, n_new: int, positions: Sequence[int]) -> Poly:
        """Re-index variables: variable ``i`` becomes ``positions[i]`` of ``n_new``."""
        out = {}
        for m, c in self._terms.items():
            e = [0] * n_new
            for i, p in enumerate(positions):
                e[p] += m[i]
            out[tuple(e)] = c
        return Poly._raw(n_new, out)

    # -- serialisation ------------------------------------------------------
    def to_json(self) -> list[dict]:
        return [{"exps": list(m), "coeff": c} for m, c in self._terms.items()]

    @classmethod
    def from_json(cls, n: int, data: Iterable[Mapping]) -> Poly:
        terms: dict[Monomial, float] = {}
        for t in data:
            exps = tuple(int(e) for e in t["exps"])
            terms[exps] = terms.get(exps, 0.0) + float(t["coeff"])
        return cls(n, terms)


# functional aliases -----------------------------------------------------------

def add(p: Poly, q: Poly) -> Poly:
    return p + q


def mul(p: Poly, q: Poly) -> Poly:
    return p * q


def scale(p: Poly, c: float) -> Poly:
    return p * float(c)


def gradient(p: Poly) -> list[Poly]:
    return p.gradient()


def evaluate(p: Poly, x: Sequence[float]) -> float:
    return p.eval(x)


def compose(p: Poly, subs: Sequence[Poly], max_degree: int | None = None) -> Poly:
    """Substitute ``subs[i]`` for variable ``i`` of ``p``.

    All substituted polynomials must share one dimension ``m``; the result
    lives in ``m`` variables.  ``max_degree`` truncates intermediate products,
    which keeps high-order compositions cheap when only a Taylor jet is
    needed.
    """
    if len(subs) != p.n:
        raise ValueError(f"need {p.n} substitutions, got {len(subs)}")
    m = subs[0].n
    for s in subs:
        if s.n != m:
            raise ValueError("substituted polynomials must share a dimension")

    def trunc(q: Poly) -> Poly:
        return q if max_degree is None else q.truncate(max_degree)

    cache: dict[tuple[int, int], Poly] = {}

    def power(i: int, e: int) -> Poly:
        if e == 0:
            return Poly.constant(m, 1.0)
        if (i, e) not in cache:
            cache[(i, e)] = subs[i] if e == 1 else trunc(power(i, e - 1) * subs[i])
        return cache[(i, e)]

    out: dict[Monomial, float] = {}
    for exps, c in p.items():
        term = Poly.constant(m, c)
        for i, e in enumerate(exps):
            if e:
                term = trunc(term * power(i, e))
        for mono, v in term.items():
            out[mono] = out.get(mono, 0.0) + v
    return Poly._raw(m, out)


def linear_substitute(p: Poly, M) -> Poly:
    """Return ``q`` with ``q(z) = p(M @ z)``.

    The expansion is dense; degrees in this package are small.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (p.n, p.n):
        raise ValueError(f"substitution matrix must be {p.n}x{p.n}, got {M.shape}")
    rows = [
        Poly._raw(p.n, {tuple(int(j == i) for j in range(p.n)): M[r, i] for i in range(p.n)})
        for r in range(p.n)
    ]
    return compose(p, rows)


@dataclass(frozen=True)
class PolySystem:
    """Polynomial vector field ``x' = f(x)`` with an equilibrium at the origin."""

    f: tuple[Poly, ...]

    def __init__(self, f: Sequence[Poly]):
        f = tuple(f)
        if not f:
            raise ValueError("vector field must have at least one component")
        n = f[0].n
        if len(f) != n:
            raise ValueError(f"vector field has {len(f)} components but {n} variables")
        for i, fi in enumerate(f):
            if fi.n != n:
                raise ValueError(f"component {i} has dimension {fi.n}, expected {n}")
            if fi.coeff((0,) * n) != 0.0:
                raise ValueError(f"f_{i + 1}(0) != 0: the origin must be an equilibrium")
        object.__setattr__(self, "f", f)

    @property
    def n(self) -> int:
        return len(self.f)

    @property
    def degree(self) -> int:
        return max(fi.degree for fi in self.f)

    def __call__(self, x) -> np.ndarray:
        return np.array([fi.eval(x) for fi in self.f])

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([fi.eval_many(X) for fi in self.f])

    def evaluator(self):
        """Return a fast ``x -> f(x)`` closure for repeated single-point calls."""
        monos = sorted({m for fi in self.f for m in fi._terms}, key=monomial_key)
        if not monos:
            return lambda x: np.zeros(self.n)
        index = {m: i for i, m in enumerate(monos)}
        E = np.array(monos, dtype=float)
        C = np.zeros((self.n, len(monos)))
        for i, fi in enumerate(self.f):
            for m, c in fi.items():
                C[i, index[m]] = c

        def f(x):
            return C @ np.prod(np.power(np.asarray(x, dtype=float), E), axis=1)

        return f

    def to_json(self) -> dict:
        return {"n": self.n, "f": [fi.to_json() for fi in self.f]}

    @classmethod
    def from_json(cls, data: Mapping) -> PolySystem:
        n = int(data["n"])
        return cls([Poly.from_json(n, comp) for comp in data["f"]])

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> PolySystem:
        return cls.from_json(json.loads(text))

