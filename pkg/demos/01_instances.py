# Random Max-Cut instances and the exact / certified reference values.
import numpy as np

from qnes.problem import (
    MaxCutInstance,
    brute_force_optimum,
    content_hash,
    cut_values,
    format_edge_list,
    generate_instance,
    parse_edge_list,
    spectral_upper_bound,
)

inst = generate_instance(16, 0.5, seed=3)
print("nodes", inst.n, "edges", inst.n_edges, "hash", content_hash(inst)[:12])

# the same seed on more nodes contains the smaller graph as an induced subgraph
big = generate_instance(20, 0.5, seed=3)
print("prefix property:", set(inst.edges) <= set(big.edges))

# cut sizes of a few random assignments
rng = np.random.default_rng(0)
x = rng.choice([-1, 1], size=(5, inst.n))
print("random cuts", cut_values(inst, x))

best, count = brute_force_optimum(inst)
print("max cut", best, "attained by", count, "assignments (global flips counted)")
print("spectral bound (n/4) lambda_max(L) = %.3f" % spectral_upper_bound(inst))

# plain-text round trip
text = format_edge_list(inst)
print(text.splitlines()[0], "...")
# the edge list carries no seed, so compare the graph itself
assert parse_edge_list(text) == MaxCutInstance(inst.n, inst.edges)
