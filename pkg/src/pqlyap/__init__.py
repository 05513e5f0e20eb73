"""Local asymptotic stability certificates for polynomial ODEs.

Lyapunov functions are searched for with sum-of-squares programs, either in
full generality or in a partially quadratic form that is quadratic in the
directions whose linearisation is already stable.  Center-manifold
approximation and reduction are provided alongside.
"""

from .certify import (
    Certificate,
    CertVerdict,
    Form,
    ValidationReport,
    certify,
    halton_ball,
    integrate,
    validate_lf,
)
from .cman import CenterManifold, ReducedSystem, approximate_eta, pde_residual, reduce
from .errors import (
    DecouplingError,
    DegreeError,
    MalformedProblemError,
    NoCenterBlockError,
    PqlyapError,
    ResonanceError,
    SpectralError,
    UnstableSpectrumError,
)
from .poly import Poly, PolySystem, compose, linear_substitute, monomial_basis
from .sdp import SdpSolution, Status, solve, verify_solution
from .soscomp import SdpProblem, VarCount, assemble_v, compile_full, compile_partial, count_vars
from .spectral import (
    BlockSplit,
    SpectrumClass,
    Verdict,
    block_diagonalize,
    classify,
    linearize,
    solve_lyapunov,
)
from .transform import SplitSystem, split_system, transform_field

__version__ = "0.1.0"
