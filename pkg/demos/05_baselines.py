# Reference solvers: random assignment, Burer-Monteiro relaxation, hyperplane
# rounding, and the denominator used for approximation ratios.
import numpy as np

from qnes.baselines import burer_monteiro, default_rank, hyperplane_round, random_cut, ubd_estimate
from qnes.problem import generate_instance

inst = generate_instance(50, 0.5, seed=0)
print("n=50 edges", inst.n_edges)

cuts = [random_cut(inst, seed=s)[0] for s in range(2000)]
print("random assignment: mean %.1f (|E|/2 = %.1f), best of 2000 %d" % (np.mean(cuts), inst.n_edges / 2, max(cuts)))

for p in (2, 3, default_rank(inst.n)):
    f = burer_monteiro(inst, p=p, seed=0)
    cut, _ = hyperplane_round(f, inst, seed=0, repeats=100)
    print(f"rank {p:2d}: relaxation {f.sdp_value:8.3f} ({f.iterations} iters)  rounded cut {cut}")

u = ubd_estimate(inst)
print("spectral %.3f  BM %.3f  -> estimate %.3f" % (u.spectral, u.bm_value, u.estimate))
