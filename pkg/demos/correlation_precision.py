"""
Linear correlation and precision under ellipticity
==================================================

For elliptical distributions the linear correlation is ``sin(pi * tau / 2)``.
A block-constant Kendall estimate therefore gives a block-constant
correlation matrix, and its inverse has the same block pattern.
"""
import numpy as np

from blocktau import (
    build_path, kendall_tau, precision_matrix, select_structure, sine_transform)
from blocktau.simulate import Scenario, sample_copula

np.set_printoptions(precision=3, suppress=True, linewidth=120)

sc = Scenario.preset("example10", n=400)
X = sample_copula(sc, replicate=2)
tau = kendall_tau(X)
path = build_path(tau, X, w=0.75)
i, G = select_structure(path, 0.05)
print(f"selected {G.to_json_obj()}")

P_raw = sine_transform(tau.matrix())
P = sine_transform(path.tau(i).matrix())
P_true = sine_transform(sc.true_tau)
print("\ncorrelation error (Frobenius): "
      f"raw {np.linalg.norm(P_raw - P_true):.3f}, structured {np.linalg.norm(P - P_true):.3f}")

Om = precision_matrix(P, G)
print("\nblock-structured precision matrix")
print(Om)
print("\nraw precision, for comparison")
print(np.linalg.inv(P_raw))
