"""
A small simulation study
========================

For each replicate the path is built and compared with the known truth.
``nu2`` is the best squared-error reduction available on the path, ``xi``
the reduction achieved by the structure selected at a given level.
"""
from blocktau.simulate import Scenario, run_study

for name in ("example10", "example10_weak", "example10_cauchy"):
    sc = Scenario.preset(name, replicates=20, alpha_levels=(0.01, 0.05))
    for n in (125, 250, 500):
        agg = run_study(sc, workers=4, n=n).aggregates
        xi = ", ".join(f"xi({k}) {v:.2f}" for k, v in agg["xi_mean"].items())
        print(f"{name:17s} n={n:4d}  truth on path {agg['truth_rate']:.2f}  "
              f"nu2 {agg['nu2_mean']:.2f}  {xi}")

# an unstructured design: merging can only hurt
agg = run_study(Scenario.preset("toeplitz20", replicates=10)).aggregates
print(f"\ntoeplitz20: nu2 {agg['nu2_mean']:.2f}, xi(0.05) {agg['xi_mean']['0.05']:.2f}")
