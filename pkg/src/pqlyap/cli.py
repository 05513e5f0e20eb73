"""Command-line front end.

Subcommands
-----------
certify   decide local stability of a system read from JSON
example   emit one of the built-in example systems as JSON
count     CSV table of SDP decision-variable counts (full vs partial)
reduce    center-manifold approximation and the reduced system

Exit codes: 0 stable, 2 unstable by the first method, 3 not certified (or
no center block for ``reduce``), 64 for bad input or usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .certify import CertVerdict, certify
from .cman import approximate_eta, pde_residual, reduce
from .errors import NoCenterBlockError, PqlyapError, UnstableSpectrumError
from .poly import Poly, PolySystem
from .soscomp import count_vars
from .transform import split_system

EXIT_OK = 0
EXIT_UNSTABLE = 2
EXIT_NOT_CERTIFIED = 3
EXIT_USAGE = 64

LOTKA_N_RANGE = (2, 8)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which would collide with "unstable"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- example systems --------------------------------------------------------------

def illustrative_system() -> PolySystem:
    """``x1' = -x1 x2``, ``x2' = -x2 + x1^2 - 2 x2^2``."""
    x1, x2 = Poly.variable(2, 0), Poly.variable(2, 1)
    return PolySystem([-(x1 * x2), -x2 + x1 * x1 - x2 * x2 * 2.0])


def lotka_volterra(n: int, seed: int = 0) -> PolySystem:
    """Generalised Lotka-Volterra ``x_i' = x_i (r_i + (B x)_i)``.

    ``r_1 = 0`` and the remaining growth rates are drawn from
    ``uniform(-1.5, -0.5)``; ``B`` is drawn from ``uniform(-1, 1)``.
    """
    lo, hi = LOTKA_N_RANGE
    if not lo <= n <= hi:
        raise UsageError(f"lotka needs {lo} <= n <= {hi}, got {n}")
    rng = np.random.default_rng(seed)
    r = np.concatenate([[0.0], rng.uniform(-1.5, -0.5, n - 1)])
    B = rng.uniform(-1.0, 1.0, (n, n))
    x = [Poly.variable(n, i) for i in range(n)]
    f = []
    for i in range(n):
        g = Poly.constant(n, r[i])
        for j in range(n):
            g = g + x[j] * B[i, j]
        f.append(x[i] * g)
    return PolySystem(f)


def coupled_system(n: int) -> PolySystem:
    """Scalar ``z1' = z1^2 + |z2|^2 + |z3|^2`` fed by ``z2' = -z2`` (2 states)
    and ``z3' = -z3`` (``n`` states)."""
    if n < 1:
        raise UsageError(f"coupled needs n >= 1, got {n}")
    dim = 3 + n
    z = [Poly.variable(dim, i) for i in range(dim)]
    g = Poly.zero(dim)
    for zi in z:
        g = g + zi * zi
    return PolySystem([g] + [-zi for zi in z[1:]])


EXAMPLES = {
    "illustrative": lambda n, seed: illustrative_system(),
    "lotka": lambda n, seed: lotka_volterra(n, seed),
    "coupled": lambda n, seed: coupled_system(n),
}


# -- helpers ---------------------------------------------------------------------

def _read_system(path: str | None) -> PolySystem:
    if path is None:
        raise UsageError("--input is required")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return PolySystem.loads(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path} is not a valid system: {exc}") from exc


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value}")


def parse_range(text: str) -> range:
    """``"5"`` or ``"2..8"`` (inclusive)."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}; use N or A..B") from exc
    if lo < 1 or hi < lo:
        raise UsageError(f"bad range {text!r}")
    return range(lo, hi + 1)


# -- commands --------------------------------------------------------------------

def cmd_certify(args) -> int:
    system = _read_system(args.input)
    if args.degree < 1:
        raise UsageError("--degree must be >= 1")
    _positive("--radius", args.radius)
    _positive("--epsilon", args.epsilon)
    cert = certify(system, d=args.degree, R=args.radius, eps=args.epsilon,
                   form=args.form, tol=args.tol)
    _write(cert.dumps(indent=2), args.output)
    if args.output is not None:
        print(cert.verdict.value)
    if cert.verdict in (CertVerdict.STABLE_FIRST_METHOD, CertVerdict.STABLE_SOS):
        return EXIT_OK
    if cert.verdict is CertVerdict.UNSTABLE_FIRST_METHOD:
        return EXIT_UNSTABLE
    return EXIT_NOT_CERTIFIED


def cmd_example(args) -> int:
    system = EXAMPLES[args.name](args.n, args.seed)
    _write(json.dumps(system.to_json(), indent=2), args.output)
    return EXIT_OK


def cmd_count(args) -> int:
    ns = parse_range(args.n)
    if args.degree < 1:
        raise UsageError("--degree must be >= 1")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["n", "full_count", "partial_count"])
    for n in ns:
        k = min(args.k, n)
        c = count_vars(n, k, args.degree, f_degree=args.f_degree)
        w.writerow([n, c.full_count, c.partial_count])
    text = buf.getvalue()
    if args.output is None:
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return EXIT_OK


def cmd_reduce(args) -> int:
    system = _read_system(args.input)
    if args.degree < 2:
        raise UsageError("--degree must be >= 2")
    try:
        split = split_system(system, args.tol)
    except UnstableSpectrumError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_UNSTABLE
    try:
        cm = approximate_eta(split, args.degree)
    except NoCenterBlockError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    red = reduce(split, cm)
    out = {
        "center_manifold": cm.to_json(),
        "residual_field": [r.to_json() for r in pde_residual(split, cm, args.degree)],
        "reduced": red.to_json(),
        "T": split.T.tolist(),
    }
    _write(json.dumps(out, indent=2), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pqlyap", description="Local stability certificates for polynomial ODEs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", help="certify local asymptotic stability")
    c.add_argument("--input", required=True, help="system JSON")
    c.add_argument("--output", help="certificate JSON (default: stdout)")
    c.add_argument("--degree", type=int, default=2, help="half degree d of V (default 2)")
    c.add_argument("--radius", type=float, default=0.1, help="ball radius R (default 0.1)")
    c.add_argument("--epsilon", type=float, default=0.1, help="positivity margin (default 0.1)")
    c.add_argument("--form", choices=["auto", "full", "partial"], default="auto")
    c.add_argument("--tol", type=float, default=None, help="imaginary-axis tolerance")
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("example", help="write an example system as JSON")
    e.add_argument("name", choices=sorted(EXAMPLES))
    e.add_argument("--n", type=int, default=2, help="size parameter")
    e.add_argument("--seed", type=int, default=0, help="RNG seed for lotka")
    e.add_argument("--output")
    e.set_defaults(func=cmd_example)

    k = sub.add_parser("count", help="decision-variable counts as CSV")
    k.add_argument("--n", default="2..8", help="N or A..B (default 2..8)")
    k.add_argument("--k", type=int, default=1, help="center dimension (clipped to n)")
    k.add_argument("--degree", type=int, default=3, help="half degree d (default 3)")
    k.add_argument("--f-degree", type=int, default=2, help="degree of the vector field")
    k.add_argument("--output")
    k.set_defaults(func=cmd_count)

    r = sub.add_parser("reduce", help="center-manifold reduction")
    r.add_argument("--input", required=True)
    r.add_argument("--degree", type=int, default=4, help="approximation degree (default 4)")
    r.add_argument("--tol", type=float, default=None)
    r.add_argument("--output")
    r.set_defaults(func=cmd_reduce)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PqlyapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CERTIFIED


if __name__ == "__main__":
    sys.exit(main())
