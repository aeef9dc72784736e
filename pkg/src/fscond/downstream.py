"""Hybrid quantum-classical binary classifier and the lambda sweep.

The classifier encodes standardized clinical features into the circuit,
composes trainable base parameters with the frozen generator's data-dependent
correction scaled by lambda, reads out per-qubit Z expectations through a
linear layer, and trains with softmax cross-entropy. Circuit gradients use
the exact parameter-shift rule and are norm-clipped; the readout gradient is
the usual closed form. Sweeping lambda over a grid produces the final-metric
and epoch-resolved tables.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backends
from ._parallel import parallel_map
from .ansatz import AnsatzSpec, CircuitTemplate, compose_parameters, template_for
from .errors import DatasetError, DimensionMismatchError
from .sculpture import (AdamWHyper, AdamWState, MetaModelParams, adamw_step,
                        meta_forward)

logger = logging.getLogger(__name__)

FEATURE_COLUMNS = ("Pregnancies", "Glucose", "BloodPressure", "SkinThickness",
                   "Insulin", "BMI", "DiabetesPedigreeFunction", "Age")
LABEL_COLUMN = "Outcome"


@dataclass
class RawTable:
    """Parsed CSV content before splitting/standardization."""

    features: np.ndarray  # (M, d) float64
    labels: np.ndarray    # (M,) int
    column_names: list[str]


@dataclass
class Dataset:
    """Standardized features with a stratified train/test split.

    Standardization statistics come from the train rows only and are applied
    to the whole matrix.
    """

    features: np.ndarray
    labels: np.ndarray
    train_indices: np.ndarray
    test_indices: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def train_features(self) -> np.ndarray:
        return self.features[self.train_indices]

    @property
    def train_labels(self) -> np.ndarray:
        return self.labels[self.train_indices]

    @property
    def test_features(self) -> np.ndarray:
        return self.features[self.test_indices]

    @property
    def test_labels(self) -> np.ndarray:
        return self.labels[self.test_indices]


def load_diabetes_csv(path) -> RawTable:
    """Parse the diabetes CSV: 8 numeric feature columns plus Outcome in {0,1}."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if LABEL_COLUMN not in header:
            raise DatasetError(f"{path}: missing required column {LABEL_COLUMN!r}")
        label_col = header.index(LABEL_COLUMN)
        feature_cols = [i for i in range(len(header)) if i != label_col]
        if len(feature_cols) != 8:
            raise DatasetError(
                f"{path}: expected 8 feature columns + {LABEL_COLUMN!r}, "
                f"found {len(feature_cols)} feature columns")

        features: list[list[float]] = []
        labels: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}")
            try:
                values = [float(row[i]) for i in feature_cols]
                label_value = float(row[label_col])
            except ValueError as exc:
                raise DatasetError(f"{path}:{line_no}: non-numeric cell ({exc})") from None
            if label_value not in (0.0, 1.0):
                raise DatasetError(
                    f"{path}:{line_no}: invalid label {row[label_col]!r} "
                    "(must be 0 or 1)")
            if not all(math.isfinite(v) for v in values):
                raise DatasetError(f"{path}:{line_no}: non-finite feature value")
            features.append(values)
            labels.append(int(label_value))

    if not features:
        raise DatasetError(f"{path}: no data rows")
    return RawTable(np.asarray(features, dtype=np.float64),
                    np.asarray(labels, dtype=np.int64),
                    [header[i] for i in feature_cols])


def prepare_dataset(raw: RawTable, test_fraction: float = 0.2,
                    seed: int = 0) -> Dataset:
    """Stratified shuffle split plus z-score standardization fit on train."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    labels = raw.labels
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for cls in (0, 1):
        cls_idx = np.flatnonzero(labels == cls)
        if cls_idx.size == 0:
            raise DatasetError(f"class {cls} absent from the dataset")
        perm = rng.permutation(cls_idx)
        n_test = int(round(test_fraction * cls_idx.size))
        if n_test == 0 or n_test == cls_idx.size:
            raise DatasetError(
                f"class {cls} would be absent from one side of the split")
        test_parts.append(perm[:n_test])
        train_parts.append(perm[n_test:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))

    train_features = raw.features[train_idx]
    mean = train_features.mean(axis=0)
    std = train_features.std(axis=0)
    if np.any(std <= 0.0):
        bad = [raw.column_names[i] for i in np.flatnonzero(std <= 0.0)]
        raise DatasetError(f"constant feature column(s) {bad}; cannot standardize")
    standardized = (raw.features - mean) / std
    return Dataset(standardized, labels.copy(), train_idx, test_idx, mean, std)


def synthesize_diabetes_csv(path, rows: int = 768, seed: int = 0) -> Path:
    """Write a synthetic stand-in with the public diabetes-dataset schema.

    A latent risk factor drives correlated, plausibly-ranged clinical columns
    and a noisy binary outcome (roughly one-third positive), so classifiers
    see a learnable but non-separable problem. Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(size=rows)  # latent risk

    glucose = np.clip(np.rint(112 + 24 * (0.75 * u + 0.66 * rng.normal(size=rows))),
                      56, 199).astype(int)
    bmi = np.clip(32 + 6.8 * (0.5 * u + 0.87 * rng.normal(size=rows)), 18.0, 59.9)
    age = np.clip(np.rint(33 + 11 * (0.45 * u + 0.89 * rng.normal(size=rows))
                          + rng.exponential(4.0, size=rows)), 21, 81).astype(int)
    pregnancies = rng.poisson(np.clip((age - 18) / 7.0, 0.3, 6.0))
    blood_pressure = np.clip(np.rint(69 + 12 * (0.25 * u + 0.97 * rng.normal(size=rows))),
                             35, 120).astype(int)
    skin = np.clip(np.rint(26 + 9 * (0.3 * u + 0.95 * rng.normal(size=rows))),
                   7, 63).astype(int)
    skin = np.where(rng.random(rows) < 0.22, 0, skin)
    insulin = np.clip(np.rint(125 + 95 * (0.45 * u + 0.89 * rng.normal(size=rows))),
                      15, 846).astype(int)
    insulin = np.where(rng.random(rows) < 0.35, 0, insulin)
    pedigree = np.clip(np.exp(-1.05 + 0.30 * u + 0.45 * rng.normal(size=rows)),
                       0.05, 2.5)

    g = (glucose - 112.0) / 24.0
    b = (bmi - 32.0) / 6.8
    a = (age - 36.0) / 12.0
    ped = (np.log(pedigree) + 1.05) / 0.5
    pr = (pregnancies - 3.0) / 2.5
    logit = (-0.95 + 1.25 * g + 0.55 * b + 0.40 * a + 0.30 * ped + 0.22 * pr
             + 0.45 * g * b - 0.25 * g * g)
    outcome = (rng.random(rows) < 1.0 / (1.0 + np.exp(-logit))).astype(int)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(FEATURE_COLUMNS + (LABEL_COLUMN,)) + "\n")
        for i in range(rows):
            fh.write(f"{pregnancies[i]},{glucose[i]},{blood_pressure[i]},"
                     f"{skin[i]},{insulin[i]},{bmi[i]:.1f},{pedigree[i]:.3f},"
                     f"{age[i]},{outcome[i]}\n")
    return path


@dataclass
class ReadoutParams:
    """Linear readout: logits = w @ z_expectations + b."""

    w: np.ndarray  # (2, num_qubits)
    b: np.ndarray  # (2,)

    @classmethod
    def initialize(cls, num_qubits: int, sigma: float,
                   rng: np.random.Generator) -> "ReadoutParams":
        return cls(w=rng.normal(0.0, sigma, size=(2, num_qubits)),
                   b=np.zeros(2))


def _theta_for(theta_task: np.ndarray, x: np.ndarray, lam: float,
               phi: MetaModelParams | None) -> np.ndarray:
    if phi is None:
        theta_meta = np.zeros_like(theta_task)
    else:
        theta_meta, _ = meta_forward(phi, x)
    return compose_parameters(theta_task, theta_meta, lam)


def _z_for(tpl: CircuitTemplate, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    angles = tpl.angles_for(x, theta)
    amps = np.zeros(1 << tpl.spec.num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    backends.run_gates(amps, tpl.kinds, tpl.targets, tpl.controls, angles,
                       0, len(tpl.kinds))
    return backends.z_expectations(amps, tpl.spec.num_qubits)


def classifier_forward(theta_task: np.ndarray, readout: ReadoutParams,
                       x: np.ndarray, lam: float,
                       phi: MetaModelParams | None,
                       spec: AnsatzSpec) -> np.ndarray:
    """Two class logits for one input."""
    tpl = template_for(spec)
    z0 = _z_for(tpl, x, _theta_for(theta_task, x, lam, phi))
    return readout.w @ z0 + readout.b


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """Softmax cross-entropy of two logits, stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise DimensionMismatchError(f"non-finite logits: {logits}")
    if label not in (0, 1):
        raise DimensionMismatchError(f"label must be 0 or 1, got {label!r}")
    shifted = logits - np.max(logits)
    return float(np.log(np.sum(np.exp(shifted))) - shifted[label])


@dataclass
class BatchCache:
    """Per-sample forward quantities reused by both gradient routines."""

    z: np.ndarray       # (B, num_qubits) Z expectations
    dz: np.ndarray      # (B, p, num_qubits) parameter-shift derivatives
    probs: np.ndarray   # (B, 2) softmax probabilities
    losses: np.ndarray  # (B,)

    @property
    def mean_loss(self) -> float:
        return float(self.losses.mean())


def _forward_sample(args):
    tpl, theta_task, lam, phi, x = args
    theta = _theta_for(theta_task, x, lam, phi)
    angles = tpl.angles_for(x, theta)
    return backends.z_shift_sweep(tpl.kinds, tpl.targets, tpl.controls, angles,
                                  tpl.param_positions, tpl.spec.num_qubits)


def _batch_forward(theta_task: np.ndarray, readout: ReadoutParams,
                   batch_x: np.ndarray, batch_y: np.ndarray, lam: float,
                   phi: MetaModelParams | None, spec: AnsatzSpec,
                   threads: int = 1) -> BatchCache:
    tpl = template_for(spec)
    outs = parallel_map(_forward_sample,
                        [(tpl, theta_task, lam, phi, x) for x in batch_x],
                        threads)
    z = np.stack([o[0] for o in outs])
    dz = np.stack([o[1] for o in outs])
    logits = z @ readout.w.T + readout.b
    probs = np.stack([softmax(row) for row in logits])
    losses = np.array([cross_entropy(logits[i], int(batch_y[i]))
                       for i in range(len(batch_y))])
    return BatchCache(z=z, dz=dz, probs=probs, losses=losses)


def grad_theta_task(theta_task: np.ndarray, readout: ReadoutParams,
                    batch_x: np.ndarray, batch_y: np.ndarray, lam: float,
                    phi: MetaModelParams | None, spec: AnsatzSpec,
                    cache: BatchCache | None = None,
                    threads: int = 1) -> np.ndarray:
    """Batch-mean loss gradient w.r.t. the trainable circuit parameters.

    Uses the exact +-pi/2 parameter-shift rule per Z observable; composing
    with the frozen generator adds no extra factor since d theta / d
    theta_task is the identity.
    """
    if cache is None:
        cache = _batch_forward(theta_task, readout, batch_x, batch_y, lam, phi,
                               spec, threads)
    n = len(batch_y)
    grad = np.zeros_like(theta_task)
    for i in range(n):
        dlogits = cache.probs[i].copy()
        dlogits[int(batch_y[i])] -= 1.0
        dz_dtheta = cache.dz[i]          # (p, num_qubits)
        dloss_dz = readout.w.T @ dlogits  # (num_qubits,)
        grad += dz_dtheta @ dloss_dz
    return grad / n


def grad_readout(cache: BatchCache,
                 batch_y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form softmax cross-entropy gradients of the linear readout."""
    n = len(batch_y)
    dlogits = cache.probs.copy()
    dlogits[np.arange(n), batch_y.astype(int)] -= 1.0
    dw = dlogits.T @ cache.z / n
    db = dlogits.mean(axis=0)
    return dw, db


def clip_gradient(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale to exactly max_norm when the L2 norm exceeds it."""
    if max_norm <= 0:
        raise DimensionMismatchError(f"max_norm must be positive, got {max_norm}")
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def predict(logits: np.ndarray) -> int:
    """Argmax class; exact ties resolve to class 0."""
    return int(logits[1] > logits[0])


def _test_accuracy(theta_task, readout, dataset: Dataset, lam, phi, spec,
                   threads: int = 1) -> float:
    tpl = template_for(spec)

    def one(x):
        z0 = _z_for(tpl, x, _theta_for(theta_task, x, lam, phi))
        return readout.w @ z0 + readout.b

    logits = parallel_map(one, list(dataset.test_features), threads)
    hits = sum(int(predict(lg) == int(y))
               for lg, y in zip(logits, dataset.test_labels))
    return hits / len(dataset.test_labels)


@dataclass(frozen=True)
class DownstreamConfig:
    """Classifier training hyperparameters."""

    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.05
    weight_decay: float = 0.0001
    clip_norm: float = 1.0
    init_sigma: float = 0.1
    test_fraction: float = 0.2
    threads: int = 1


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    test_accuracy: float
    theta_grad_norm: float       # after clipping, final step of the epoch
    theta_grad_norm_raw: float   # before clipping


@dataclass
class LambdaRunRecord:
    """One (lambda, seed) training run."""

    lam: float
    seed: int
    initial_test_accuracy: float
    epochs: list[EpochRow] = field(default_factory=list)
    theta_task: np.ndarray | None = None
    readout: ReadoutParams | None = None

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].train_loss

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].test_accuracy if self.epochs else self.initial_test_accuracy

    @property
    def final_grad_norm(self) -> float:
        return self.epochs[-1].theta_grad_norm


def train_one_lambda(config: DownstreamConfig, dataset: Dataset, lam: float,
                     phi: MetaModelParams | None, seed: int) -> LambdaRunRecord:
    """Train the hybrid classifier at one meta-scaling coefficient."""
    spec = config.ansatz
    if dataset.feature_dim != spec.feature_dim:
        raise DimensionMismatchError(
            f"dataset width {dataset.feature_dim} != ansatz feature_dim "
            f"{spec.feature_dim}")
    if phi is not None and phi.num_params != spec.num_params:
        raise DimensionMismatchError(
            f"generator emits {phi.num_params} parameters, ansatz needs "
            f"{spec.num_params}")

    rng = np.random.default_rng(seed)
    theta_task = rng.normal(0.0, config.init_sigma, size=spec.num_params)
    readout = ReadoutParams.initialize(spec.num_qubits, config.init_sigma, rng)

    hyper = AdamWHyper(learning_rate=config.learning_rate,
                       weight_decay=config.weight_decay)
    params = {"theta": theta_task, "w": readout.w, "b": readout.b}
    state = AdamWState.init(params, hyper)

    record = LambdaRunRecord(
        lam=lam, seed=seed,
        initial_test_accuracy=_test_accuracy(theta_task, readout, dataset, lam,
                                             phi, spec, config.threads))

    train_x = dataset.train_features
    train_y = dataset.train_labels
    n_train = train_x.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        epoch_losses: list[float] = []
        clipped_norm = 0.0
        raw_norm = 0.0
        for start in range(0, n_train, config.batch_size):
            idx = order[start:start + config.batch_size]
            bx, by = train_x[idx], train_y[idx]
            readout_now = ReadoutParams(params["w"], params["b"])
            cache = _batch_forward(params["theta"], readout_now, bx, by, lam,
                                   phi, spec, config.threads)
            g_theta = grad_theta_task(params["theta"], readout_now, bx, by,
                                      lam, phi, spec, cache=cache)
            raw_norm = float(np.linalg.norm(g_theta))
            g_theta = clip_gradient(g_theta, config.clip_norm)
            clipped_norm = float(np.linalg.norm(g_theta))
            dw, db = grad_readout(cache, by)
            params, state = adamw_step(state, params,
                                       {"theta": g_theta, "w": dw, "b": db})
            epoch_losses.append(cache.mean_loss)
        readout_now = ReadoutParams(params["w"], params["b"])
        accuracy = _test_accuracy(params["theta"], readout_now, dataset, lam,
                                  phi, spec, config.threads)
        record.epochs.append(EpochRow(
            epoch=epoch,
            train_loss=float(np.mean(epoch_losses)),
            test_accuracy=accuracy,
            theta_grad_norm=clipped_norm,
            theta_grad_norm_raw=raw_norm,
        ))
        logger.info("lambda=%.3f seed=%d epoch %d/%d: loss=%.4f acc=%.4f",
                    lam, seed, epoch, config.epochs,
                    record.epochs[-1].train_loss, accuracy)

    record.theta_task = params["theta"]
    record.readout = ReadoutParams(params["w"], params["b"])
    return record


@dataclass
class SweepTable:
    """All (lambda, seed) run records plus the derived CSV tables."""

    lambdas: list[float]
    seeds: list[int]
    records: list[LambdaRunRecord]

    def record(self, lam: float, seed: int) -> LambdaRunRecord:
        for r in self.records:
            if r.lam == lam and r.seed == seed:
                return r
        raise KeyError((lam, seed))

    def final_rows(self):
        for r in self.records:
            yield [r.lam, r.seed, r.final_loss, r.final_accuracy,
                   r.final_grad_norm]

    def heatmap(self, field_name: str) -> np.ndarray:
        """epoch x lambda matrix of the per-epoch field, averaged over seeds."""
        epochs = len(self.records[0].epochs)
        out = np.zeros((epochs, len(self.lambdas)))
        for j, lam in enumerate(self.lambdas):
            per_seed = [self.record(lam, s) for s in self.seeds]
            for e in range(epochs):
                out[e, j] = float(np.mean(
                    [getattr(r.epochs[e], field_name) for r in per_seed]))
        return out


def lambda_sweep(config: DownstreamConfig, dataset: Dataset,
                 grid: list[float], phi: MetaModelParams | None,
                 seeds: list[int]) -> SweepTable:
    """Train one classifier per (lambda, seed) pair over the given grid."""
    if not grid:
        raise DimensionMismatchError("lambda grid must be nonempty")
    records = []
    for lam in grid:
        for seed in seeds:
            records.append(train_one_lambda(config, dataset, lam, phi, seed))
    return SweepTable(list(grid), list(seeds), records)
