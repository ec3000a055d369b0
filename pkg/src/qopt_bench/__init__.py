"""Benchmark toolkit for preconditioned optimizers on shallow QAOA MaxCut.

Subpackages/modules:

- ``problems``: weighted MaxCut instance generation and exact solutions
- ``simulator``: statevector evaluation (expectation, gradients, metric, sampling)
- ``optimizers``: quasi-Newton, natural-gradient and stochastic optimizer loops
- ``tuner``: Gaussian-process hyperparameter search
- ``bench``: benchmark protocols, convergence and landscape metrics
- ``cli``: command-line entry points
"""

__version__ = "0.1.0"
