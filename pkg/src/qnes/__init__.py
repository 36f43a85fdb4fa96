"""Natural evolution strategies for Max-Cut with neural amplitude models.

Modules
-------
problem    instances, objective, exact and certified reference values
ansatz     real/complex RBM and single-layer amplitude models
sampler    Metropolis and exact-enumeration samplers of |psi|^2
natgrad    gradient/metric estimation, natural-gradient and optimizer updates,
           Fisher-Rao and Fubini-Study distances
baselines  random cut, Burer-Monteiro, hyperplane rounding, UBD estimate
bench      seeded experiment runner behind the ``qnes`` command
"""

__version__ = "0.1.0"
