# Natural-gradient training of a complex RBM on a 16-node graph, written out
# as an explicit loop: sample, estimate, step.
import numpy as np

from qnes.ansatz import init_parameters
from qnes.natgrad import OptimizerConfig, estimate, init_optimizer_state, optimizer_step
from qnes.problem import brute_force_optimum, generate_instance
from qnes.sampler import SamplerConfig, metropolis_sample

inst = generate_instance(16, 0.5, seed=0)
best, _ = brute_force_optimum(inst)
print("edges", inst.n_edges, "max cut", best)

model = init_parameters("RBM", "complex", inst.n, alpha=1.0, std=0.01, seed=0)
cfg = OptimizerConfig("sgd", learning_rate=0.05, shift=0.1)
state = init_optimizer_state(cfg.kind, model.d, model.dtype)

for it in range(40):
    batch = metropolis_sample(model, SamplerConfig(batch_size=1024, n_chains=32, burn_in_sweeps=100, seed=it))
    est = estimate(model, batch, inst)
    model, state = optimizer_step(state, model, est, cfg)
    if it % 5 == 0 or it == 39:
        cuts = -est.energies
        print(f"iter {it:2d}  mean cut {cuts.mean():7.2f}  best {int(cuts.max()):3d}  "
              f"acc {batch.acceptance_rate:.3f}  residual {state.last_solve.residual:.1e}")

final = metropolis_sample(model, SamplerConfig(batch_size=1024, seed=999))
cuts = -estimate(model, final, inst).energies
print("final batch: mean %.2f, best %d, fraction at optimum %.2f" % (cuts.mean(), cuts.max(), np.mean(cuts == best)))
