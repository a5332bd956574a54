"""Expected kernels between Gaussians, and how sampling approaches them.

Run:  python demos/01_expected_kernels.py
"""

import numpy as np

from smmkit import (Empirical, ExpectedKernelConfig, Gaussian, LinearKernel, PolynomialKernel,
                    RBFKernel, expected_kernel)

rng = np.random.default_rng(0)
P = Gaussian([1.0, 0.5], [[1.0, 0.6], [0.6, 0.5]])
Q = Gaussian([-0.3, 0.8], [[0.4, -0.2], [-0.2, 0.9]])

print("Two Gaussians in the plane. Closed forms first:")
kernels = {"linear": LinearKernel(), "poly2": PolynomialKernel(2, 1.0),
           "poly3": PolynomialKernel(3, 1.0), "rbf": RBFKernel(0.7)}
exact = {}
for name, k in kernels.items():
    exact[name] = expected_kernel(ExpectedKernelConfig(k), P, Q)
    print(f"  {name:7s} {exact[name]: .6f}")

# Replace each Gaussian by n samples and watch the plug-in estimate settle.
print("\nPlug-in estimate from n draws per side, mean |error| over 30 repeats:")
print("      n  " + "  ".join(f"{name:>9s}" for name in kernels))
for n in (10, 100, 1000):
    errs = np.zeros(len(kernels))
    for _ in range(30):
        Pn = Empirical(rng.multivariate_normal(P.mean, P.cov, n))
        Qn = Empirical(rng.multivariate_normal(Q.mean, Q.cov, n))
        errs += [abs(expected_kernel(ExpectedKernelConfig(k), Pn, Qn) - exact[name])
                 for name, k in kernels.items()]
    print(f"  {n:5d}  " + "  ".join(f"{e / 30:9.2e}" for e in errs))
print("Each tenfold increase in n cuts the error by about sqrt(10).")
