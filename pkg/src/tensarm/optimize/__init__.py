"""In-house dense optimization kernels: LP, NNLS and SDP."""

from .lp import LPResult, solve_nonneg_lp, enumerate_vertices
from .nnls import NNLSResult, solve_nnls, min_norm_nonneg
from .sdp import SDProblem, SDResult, Expr, block, feasibility_margin

__all__ = [
    "LPResult",
    "solve_nonneg_lp",
    "enumerate_vertices",
    "NNLSResult",
    "solve_nnls",
    "min_norm_nonneg",
    "SDProblem",
    "SDResult",
    "Expr",
    "block",
    "feasibility_margin",
]
