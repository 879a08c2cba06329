"""
Covariance of the Kendall vector and the chi-square guide
=========================================================

The plug-in covariance of the empirical Kendall vector is averaged over the
cells implied by a partition. Under the true partition the Mahalanobis loss
of the block estimate is approximately chi-square with ``p - L`` degrees of
freedom. Under a wrong partition it grows with the sample size.
"""
import numpy as np
from scipy import stats

from blocktau import (
    BlockStructure, Partition, kendall_tau, loss, project_tau, sigma_hat, sigma_tilde)
from blocktau.simulate import Scenario, sample_copula

sc = Scenario.preset("calibration6", n=1000)
G = sc.partition
wrong = Partition.from_json([[1, 2, 4], [3, 5, 6]])
bs = BlockStructure(G)
df = bs.p - bs.L
print(f"p = {bs.p}, L = {bs.L}, degrees of freedom {df}")


def stat(X, H):
    tau = kendall_tau(X)
    est = project_tau(tau, H)
    S = sigma_tilde(sigma_hat(X), est.tau_tilde, H)
    return loss(est.tau_tilde, tau, S)


X = sample_copula(sc, replicate=0)
S = sigma_hat(X)
print("\nplug-in covariance (scaled by n), first rows:")
print(np.round(S.n * S.values[:4, :6], 3))

right = [stat(sample_copula(sc, replicate=r), G) for r in range(60)]
print(f"\nmean loss at the true partition over 60 samples: {np.mean(right):.2f}"
      f" (chi-square mean {df})")
print(f"KS distance: {stats.kstest(right, stats.chi2(df).cdf).statistic:.3f}")

for n in (250, 1000, 4000):
    X = sample_copula(sc, n=n, replicate=0)
    print(f"n = {n:5d}: loss/n true {stat(X, G) / n:.4f}, wrong {stat(X, wrong) / n:.4f}")
