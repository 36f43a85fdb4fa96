# The metric used by the natural-gradient step is the Fisher matrix in
# disguise, and the Fubini-Study distance reduces to Fisher-Rao on real roots.
import numpy as np

from qnes.ansatz import init_parameters, log_derivatives
from qnes.natgrad import exact_estimate, fisher_rao_distance, fubini_study_distance
from qnes.problem import generate_instance
from qnes.sampler import all_configurations, exact_distribution

inst = generate_instance(6, 0.5, seed=0)
model = init_parameters("RBM", "real", 6, 1.0, 0.5, seed=1)
S = exact_estimate(model, inst).metric

# Fisher matrix of p = psi^2 / Z straight from the score of log p
p = exact_distribution(model)
O = log_derivatives(model, all_configurations(6)).real
score = 2 * (O - p @ O)
fisher = (score * p[:, None]).T @ score
print("max |4S - F| =", np.abs(4 * S - fisher).max())

ev = np.linalg.eigvalsh(S)
print("metric spectrum: min %.2e max %.2e" % (ev[0], ev[-1]))

rng = np.random.default_rng(2)
a, b = rng.dirichlet(np.ones(32)), rng.dirichlet(np.ones(32))
print("Fisher-Rao   %.15f" % fisher_rao_distance(a, b))
print("Fubini-Study %.15f" % fubini_study_distance(np.sqrt(a), np.sqrt(b)))
print("global phase ignored:", fubini_study_distance(np.sqrt(a), np.exp(0.7j) * np.sqrt(a)))
