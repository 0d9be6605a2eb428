"""Approximate message passing: recursions, state evolution, and experiments.

Subpackage map:
  ensembles   - reproducible Gaussian random-matrix sampling, power iteration
  quadrature  - Gauss-Hermite rules and Gaussian expectations
  priors      - scalar priors, posterior means, MMSE
  losses      - convex losses, proximal operators, Moreau-envelope scores
  denoisers   - scalar denoisers and denoiser policies
  se          - state-evolution recursions, fixed points, calibrations
  core        - generic AMP drivers (symmetric, asymmetric, matrix-valued)
  spiked      - rank-one spiked-model estimation and inference
  glm         - GAMP for generalized linear models plus reference solvers
  metrics     - Wasserstein distance, test-function batteries, risk metrics
  cli         - experiment harness
"""

__version__ = "0.1.0"
