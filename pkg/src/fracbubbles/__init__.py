"""Bubble analysis for fractional Yamabe-type boundary problems on the flat half-space.

The package is organized around the flat model of the degenerate extension
problem div(y^(1-2g) grad U) = 0 with the critical boundary condition
-lim y^(1-2g) dU/dy = U^(2*-1):

- params: the (n, gamma) parameter pack and every closed-form constant,
- bubbles: the explicit extremal trace profiles and their scaling laws,
- extension: Poisson-kernel extensions, conormal derivatives, spectral oracle,
- grid: weighted Sobolev energies and solvers on truncated half-space grids,
- synthesis: "solution plus bubbles" Palais-Smale families,
- extraction: the iterative bubble decomposition engine,
- cli/io/figures: experiment runner, deterministic reports, optional plots.
"""

from .params import FracParams
from .bubbles import Bubble

__version__ = "0.1.0"

__all__ = ["FracParams", "Bubble", "__version__"]
