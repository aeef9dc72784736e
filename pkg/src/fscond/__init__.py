"""Spectral conditioning of parameterized quantum circuits.

Simulates a hardware-efficient ansatz, computes the Fubini-Study metric of
its state manifold, meta-trains a parameter generator that minimizes the
metric's log condition number, and benchmarks the learned initializations in
a hybrid quantum-classical classifier.
"""

__version__ = "0.1.0"
