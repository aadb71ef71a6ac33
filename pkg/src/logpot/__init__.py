"""logpot: a numerical laboratory for logarithmic and Riesz potentials on curves.

Subpackages split by concern:

- ``geometry``    curves, graph functions, arc-length sampling
- ``kernels``     kernel evaluation, truncated logarithms, energy matrices
- ``equilibrium`` simplex-constrained energy minimization, Fekete points
- ``fraclap``     fractional Laplacians, Riesz potentials, truncated pairings
- ``frostman``    ball-growth exponents and potential-to-Frostman checks
- ``regularity``  structural probes for the principal/remainder split
- ``cli``         command-line front end
- ``verify``      the acceptance suite run by ``logpot verify``
"""

__version__ = "0.1.0"
