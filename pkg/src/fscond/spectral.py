"""Eigendecomposition and every spectrum-derived diagnostic.

The eigensolver is a cyclic Jacobi iteration (compiled kernel with a numpy
twin): deterministic, dependency-free, and comfortably fast for the <= 72
parameter matrices this package produces. Block-diagonal metrics are
decomposed block by block and merged, which is exact and matches treating
the assembled matrix as a whole.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backends
from .errors import (DegenerateSpectrumError, DimensionMismatchError,
                     NonSymmetricMatrixError, SingularMetricError)
from .fsmetric import MetricTensor

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
ASYMMETRY_TOL = 1e-8

DEFAULT_EPSILON_FLOOR = 1e-10   # filtering floor for kappa/entropy/volume
DEFAULT_DEGENERACY_EPSILON = 1e-6  # plateau monitor threshold


@dataclass
class EigenDecomposition:
    """Eigenvalues sorted descending with aligned orthonormal eigenvectors
    (columns of ``eigenvectors``)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    def residual(self, matrix: np.ndarray) -> float:
        """max_i ||G v_i - lambda_i v_i||_2, the accuracy self-check."""
        r = matrix @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.max(np.linalg.norm(r, axis=0), initial=0.0))


def _fix_signs(vecs: np.ndarray) -> None:
    # deterministic sign convention: largest-magnitude component positive
    for col in range(vecs.shape[1]):
        v = vecs[:, col]
        lead = int(np.argmax(np.abs(v)))
        if v[lead] < 0:
            vecs[:, col] = -v


def _sorted_desc(values: np.ndarray, vecs: np.ndarray) -> EigenDecomposition:
    order = np.argsort(-values, kind="stable")
    vecs = vecs[:, order].copy()
    _fix_signs(vecs)
    return EigenDecomposition(values[order].copy(), vecs)


def eigh_symmetric(matrix: MetricTensor | np.ndarray) -> EigenDecomposition:
    """Cyclic-Jacobi eigendecomposition of a symmetric matrix.

    Accepts a MetricTensor (block-diagonal ones are decomposed per block and
    merged) or a plain symmetric ndarray. Inputs with asymmetry above 1e-8
    violate the contract and are rejected.
    """
    blocks = None
    if isinstance(matrix, MetricTensor):
        blocks = matrix.block_partition
        matrix = matrix.entries
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {matrix.shape}")
    asym = float(np.max(np.abs(matrix - matrix.T), initial=0.0))
    if asym > ASYMMETRY_TOL:
        raise NonSymmetricMatrixError(f"input asymmetry {asym!r} exceeds {ASYMMETRY_TOL}")

    n = matrix.shape[0]
    if blocks is None or len(blocks) <= 1:
        values, vecs, _ = backends.jacobi_eigh(matrix, JACOBI_TOL, JACOBI_MAX_SWEEPS)
        return _sorted_desc(values, vecs)

    # block-diagonal: decompose per block, embed, then sort globally
    values = np.empty(n, dtype=np.float64)
    vecs = np.zeros((n, n), dtype=np.float64)
    for start, stop in blocks:
        sub = np.ascontiguousarray(matrix[start:stop, start:stop])
        w, v, _ = backends.jacobi_eigh(sub, JACOBI_TOL, JACOBI_MAX_SWEEPS)
        values[start:stop] = w
        vecs[start:stop, start:stop] = v
    return _sorted_desc(values, vecs)


@dataclass
class SpectralSummary:
    """Spectrum-derived diagnostics after discarding eigenvalues below the
    floor epsilon_floor. lambda_min/lambda_max, kappa, entropy, effective
    dimension, volume and the generalization surrogate all refer to the
    retained set; lambda_min_raw keeps the unfiltered minimum."""

    lambda_min: float
    lambda_max: float
    kappa: float
    log_kappa: float
    entropy: float
    effective_dim: float
    volume: float
    pac_surrogate: float
    pac_upper_bound: float
    degenerate: bool
    num_filtered: int
    epsilon_floor: float
    lambda_min_raw: float
    num_retained: int
    degeneracy_epsilon: float

    CSV_HEADER = ("lambda_min", "lambda_max", "kappa", "log_kappa", "entropy",
                  "d_eff", "volume", "pac_surrogate", "degenerate")

    def csv_values(self) -> list:
        return [self.lambda_min, self.lambda_max, self.kappa, self.log_kappa,
                self.entropy, self.effective_dim, self.volume,
                self.pac_surrogate, int(self.degenerate)]

    def describe(self) -> str:
        return (f"log_kappa={self.log_kappa:.6f} kappa={self.kappa:.6f} "
                f"lambda_min={self.lambda_min:.6g} lambda_max={self.lambda_max:.6g} "
                f"entropy={self.entropy:.4f} d_eff={self.effective_dim:.2f} "
                f"volume={self.volume:.4g} pac_surrogate={self.pac_surrogate:.4f} "
                f"degenerate={self.degenerate}")


def spectral_summary(eig: EigenDecomposition, epsilon: float,
                     degeneracy_epsilon: float | None = None) -> SpectralSummary:
    """Diagnostics over the eigenvalues retained above epsilon.

    The degeneracy flag trips when more than half of all eigenvalues fall
    below degeneracy_epsilon (defaults to epsilon itself; meta-training uses
    a looser monitor threshold than the filtering floor).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if degeneracy_epsilon is None:
        degeneracy_epsilon = epsilon

    values = eig.eigenvalues
    total = values.shape[0]
    retained = values[values >= epsilon]
    num_filtered = total - retained.shape[0]
    if retained.shape[0] == 0:
        raise DegenerateSpectrumError(
            f"all {total} eigenvalues fell below the floor {epsilon!r}")

    lam_max = float(retained[0])
    lam_min = float(retained[-1])
    kappa = lam_max / lam_min
    trace = float(np.sum(retained))
    weights = retained / trace
    entropy = float(-np.sum(weights * np.log(weights)))
    effective_dim = float(1.0 / np.sum(weights**2))
    volume = float(np.exp(0.5 * np.sum(np.log(retained))))
    num_degen = int(np.sum(values < degeneracy_epsilon))

    return SpectralSummary(
        lambda_min=lam_min,
        lambda_max=lam_max,
        kappa=kappa,
        log_kappa=math.log(kappa),
        entropy=entropy,
        effective_dim=effective_dim,
        volume=volume,
        pac_surrogate=trace / lam_min,
        pac_upper_bound=retained.shape[0] * kappa,
        degenerate=num_degen * 2 > total,
        num_filtered=num_filtered,
        epsilon_floor=float(epsilon),
        lambda_min_raw=float(values[-1]),
        num_retained=int(retained.shape[0]),
        degeneracy_epsilon=float(degeneracy_epsilon),
    )


def contraction_factor(kappa: float) -> float:
    """Gradient-descent convergence factor ((kappa-1)/(kappa+1))^2 in a
    quadratic basin whose Hessian has that condition number."""
    if kappa < 1.0:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    ratio = (kappa - 1.0) / (kappa + 1.0)
    return ratio * ratio


def natural_gradient(metric: MetricTensor | np.ndarray, grad: np.ndarray,
                     ridge: float = 0.0) -> np.ndarray:
    """Solve (G + ridge*I) u = grad through the eigendecomposition.

    The solution norm must land in [|g|/(lam_max+ridge), |g|/(lam_min+ridge)];
    a violation beyond 1e-8 relative indicates a broken decomposition and
    raises. A numerically singular spectrum with ridge=0 raises
    SingularMetricError.
    """
    entries = metric.entries if isinstance(metric, MetricTensor) else np.asarray(metric)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (entries.shape[0],):
        raise DimensionMismatchError(
            f"gradient length {grad.shape} does not match metric size {entries.shape}")

    eig = eigh_symmetric(metric)
    adjusted = eig.eigenvalues + ridge
    lam_max = float(adjusted[0])
    lam_min = float(adjusted[-1])
    if lam_min <= 0.0 or lam_min <= 1e-14 * max(lam_max, 1e-300):
        raise SingularMetricError(
            f"metric numerically singular (adjusted lambda_min={lam_min!r}); "
            "pass a positive ridge")

    coeffs = eig.eigenvectors.T @ grad
    result = eig.eigenvectors @ (coeffs / adjusted)

    gnorm = float(np.linalg.norm(grad))
    rnorm = float(np.linalg.norm(result))
    lower = gnorm / lam_max
    upper = gnorm / lam_min
    slack = 1e-8 * max(upper, 1.0)
    if rnorm < lower - slack or rnorm > upper + slack:
        raise SingularMetricError(
            f"natural-gradient norm {rnorm!r} violates [{lower!r}, {upper!r}]")
    return result


def dlogkappa_dlambda(metric_at: Callable[[float], MetricTensor | np.ndarray],
                      lam0: float, h: float) -> float:
    """d/d lam of log(lambda_max/lambda_min) of metric_at(lam) at lam0.

    Extreme-eigenvalue derivatives come from first-order perturbation theory,
    d lambda_i / d lam = v_i . (dG/d lam) v_i, with dG/d lam estimated by a
    central difference of step h. Emits a warning (and still returns) when an
    extreme eigenvalue is nearly degenerate, where the perturbation formula
    turns ill-conditioned.
    """
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    g0 = metric_at(lam0)
    g0e = g0.entries if isinstance(g0, MetricTensor) else np.asarray(g0)
    gp = metric_at(lam0 + h)
    gm = metric_at(lam0 - h)
    gpe = gp.entries if isinstance(gp, MetricTensor) else np.asarray(gp)
    gme = gm.entries if isinstance(gm, MetricTensor) else np.asarray(gm)
    dg = (gpe - gme) / (2.0 * h)

    eig = eigh_symmetric(g0e)
    values = eig.eigenvalues
    scale = float(np.max(np.abs(values), initial=0.0))
    if values.shape[0] >= 2:
        gap_max = float(values[0] - values[1])
        gap_min = float(values[-2] - values[-1])
        if min(gap_max, gap_min) <= 1e-6 * scale:
            warnings.warn(
                "extreme eigenvalue nearly degenerate; d log kappa / d lambda "
                "is ill-conditioned", stacklevel=2)

    v_max = eig.eigenvectors[:, 0]
    v_min = eig.eigenvectors[:, -1]
    d_max = float(v_max @ dg @ v_max)
    d_min = float(v_min @ dg @ v_min)
    return d_max / float(values[0]) - d_min / float(values[-1])
