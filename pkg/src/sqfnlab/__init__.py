"""Square-function diagnostics for absolute continuity of measures on [0, 1).

The package computes Wasserstein-1 alpha-numbers, dyadic Delta-numbers,
stopping-time trees with adapted Haar analysis, Carleson sums and square
functions for pairs of finite measures on the unit interval, together with
an experiment runner that exercises the machinery on concrete families of
measures (multiplicative cascades, Cantor-type measures, perturbed
densities, atomic examples).
"""

__version__ = "0.1.0"

from .measure import (
    Measure,
    PiecewiseLinearFn,
    generate,
    mass,
    cdf_difference,
    blowup,
    integrate,
)
from .transport import W1Result, w1_supported, w1_unrestricted, w1_oracle

__all__ = [
    "Measure",
    "PiecewiseLinearFn",
    "generate",
    "mass",
    "cdf_difference",
    "blowup",
    "integrate",
    "W1Result",
    "w1_supported",
    "w1_unrestricted",
    "w1_oracle",
    "__version__",
]
