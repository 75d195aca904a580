"""statage: risk-aware age-of-information metrics and optimizers.

Modules
-------
risk        VaR / CVaR / EVaR functionals of peak-age distributions.
numerics    Lambert W, bisection, golden-section minimization.
fading      Optimal sampling over a block-fading channel.
tdma        Min-max transmission-time allocation for TDMA updates.
simulate    Seeded Monte Carlo validation of both systems.
cli         Command-line experiment runner.
"""

from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
