"""
The greedy path of partitions
=============================

Starting from singletons, clusters are merged two at a time. Each step
reports the Mahalanobis loss of its block estimate and the chi-square tail
of that loss. A sharp drop of the tail marks the point where merging starts
to destroy structure.
"""
import numpy as np

from blocktau import build_path, kendall_tau, select_structure
from blocktau.simulate import Scenario, sample_copula

sc = Scenario.preset("example10", n=500)
X = sample_copula(sc, replicate=1)
tau = kendall_tau(X)

# w in [0, 1] shrinks the covariance estimate toward its diagonal
path = build_path(tau, X, w=0.75)

print(f"{'i':>3} {'L_i':>4} {'loss':>10} {'alpha':>9}  partition")
for G, L, l, a in zip(path.partitions, path.n_blocks, path.losses, path.alphas):
    print(f"{G.K:3d} {L:4d} {l:10.3f} {a:9.2e}  {G.to_json_obj()}")

i, G = select_structure(path, 0.05)
print(f"\nselected at level 0.05: i = {i}, {G.to_json_obj()}")
print("true partition on the path:", sc.partition in path.partitions)

# the tail is a heuristic guide: any level inside the gap gives the same answer
for level in (0.001, 0.01, 0.2):
    print(f"level {level}: i = {select_structure(path, level)[0]}")
