"""Low-rank compression of rectangular kernel matrices by geometric subset selection.

Submodules: ``pointset`` (point sets, delta, synthetic geometries),
``selectors`` (FPS, uniform, mixed, anchor grid), ``kernels`` (registry and
lazy kernel matrices), ``linalg`` (ID, truncated pseudoinverse, SVD floors),
``factor`` (two-sided, one-sided, symmetric, ACA), ``bounds`` (brute-force
error estimates), ``indicators`` (subset-quality indicators) and ``harness``
(experiments and CLI).
"""
__version__ = "0.1.0"

from .factor import LowRankFactorization, aca, evaluate_error, one_sided, symmetric, two_sided
from .kernels import KernelMatrixHandle, KernelSpec, parse_kernel
from .pointset import PointSet, SubsetSelection, delta
from .selectors import SelectorConfig, select

__all__ = ["__version__", "LowRankFactorization", "aca", "evaluate_error", "one_sided", "symmetric",
           "two_sided", "KernelMatrixHandle", "KernelSpec", "parse_kernel", "PointSet",
           "SubsetSelection", "delta", "SelectorConfig", "select"]
