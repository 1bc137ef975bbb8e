"""Transfer inequalities for low-degree polynomials, with applications.

Subpackages
-----------
dist      distribution catalog: pdfs, samplers, ratio sups, divergences, bridges
poly      multivariate polynomials: bases, regression, Monte Carlo functionals
transfer  coefficient formulas, empirical two-sided checks, coefficient catalog
boolean   hypercube Fourier toolkit and the seen/unseen transfer check
trunc     truncated-regression MSE transfer
icl       linear self-attention in-context learning and distribution shifts
gotu      diagonal linear networks under the canonical holdout
nets      from-scratch MLP with backprop and AdaGrad
cli       experiment runner (``polytransfer run <config>``)
"""

__version__ = "0.1.0"
