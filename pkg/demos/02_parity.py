# A single complex hidden unit represents the uniform distribution over
# even-weight bit strings: 2cosh(i pi/2 * |x|) vanishes exactly when |x| is odd.
import numpy as np

from qnes.ansatz import parity_model, unnormalized_probability
from qnes.sampler import SamplerConfig, all_configurations, metropolis_sample

for n in (2, 3, 6, 10):
    model = parity_model(n)
    xs = all_configurations(n, "01")
    p = unnormalized_probability(model, xs)
    p /= p.sum()
    even = xs.sum(axis=1) % 2 == 0
    tv = 0.5 * np.abs(p - even / even.sum()).sum()
    print(f"n={n:2d} hidden={model.m} support={int((p > 0).sum()):4d}/{2**n} TV={tv:.1e}")

# Metropolis cannot move: every single flip leaves the support
batch = metropolis_sample(parity_model(6), SamplerConfig(batch_size=64, n_chains=8, burn_in_sweeps=5))
print("acceptance", batch.acceptance_rate, "odd samples", int((batch.configs.sum(axis=1) % 2).sum()))
