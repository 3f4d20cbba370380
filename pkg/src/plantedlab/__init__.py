"""plantedlab: a desk-scale numerical laboratory for planted-vs-uniform
distinguishing problems.

Subpackages by role:

- ``models``     six planted/uniform distribution pairs, sampling, densities
- ``fourier``    multilinear Walsh analysis on the cube, Hermite analysis
- ``hypergraphs``  even-hypergraph counting with a disk cache
- ``ldlr``       low-degree likelihood-ratio norms and the optimal scalar
                 distinguisher
- ``pseudocal``  pseudo-calibrated truncated moment matrices and their
                 PSD / subspace / scalar checks
- ``duality``    exact primal/dual solvers for the pseudodistribution and
                 low-degree distinguisher programs on enumerable spaces
- ``robust``     subsampling schemes and Monte Carlo robust-inference rates
- ``moments``    solution moment matrices, spectral richness, sign rounding
- ``cli``        configuration-driven experiment runner
"""

from .models import Instance, PlantedModel, Solution, sample_planted, sample_uniform

__all__ = [
    "Instance",
    "PlantedModel",
    "Solution",
    "sample_planted",
    "sample_uniform",
]

__version__ = "0.1.0"
