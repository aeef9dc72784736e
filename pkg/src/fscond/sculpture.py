"""Meta-learned circuit-parameter generator and its training loop.

The generator is a small MLP: a shared tanh encoder followed by one linear
head per circuit parameter, squashed through pi * sigmoid so every generated
angle lies in (0, pi). Meta-training minimizes the log condition number of
the batch-averaged block-diagonal metric at the generated parameter point:
the loss gradient w.r.t. the generated angles comes from central finite
differences, and is chained through the network with exact backpropagation.
Updates use AdamW with decoupled weight decay.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .ansatz import AnsatzSpec
from .errors import (BarrenPlateauError, CheckpointError,
                     DegenerateSpectrumError, DimensionMismatchError)
from .fsmetric import fs_metric_batch_avg
from .spectral import SpectralSummary, eigh_symmetric, spectral_summary

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

PARAM_KEYS = ("w1", "b1", "w2", "b2")


@dataclass
class MetaModelParams:
    """Weights of the generator MLP: encoder (w1, b1) and heads (w2, b2)."""

    w1: np.ndarray  # (hidden, feature_dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (num_params, hidden)
    b2: np.ndarray  # (num_params,)
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.activation != "tanh":
            raise DimensionMismatchError(f"unsupported activation {self.activation!r}")
        hidden, d = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape[1] != hidden:
            raise DimensionMismatchError("encoder/head shapes are inconsistent")
        if self.b2.shape != (self.w2.shape[0],):
            raise DimensionMismatchError("head bias shape mismatch")

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def num_params(self) -> int:
        return self.w2.shape[0]

    @classmethod
    def initialize(cls, feature_dim: int, num_params: int, hidden_dim: int,
                   sigma: float, rng: np.random.Generator) -> "MetaModelParams":
        """Gaussian init, all weights and biases ~ N(0, sigma^2)."""
        return cls(
            w1=rng.normal(0.0, sigma, size=(hidden_dim, feature_dim)),
            b1=rng.normal(0.0, sigma, size=hidden_dim),
            w2=rng.normal(0.0, sigma, size=(num_params, hidden_dim)),
            b2=rng.normal(0.0, sigma, size=num_params),
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    @classmethod
    def from_dict(cls, arrays: dict[str, np.ndarray]) -> "MetaModelParams":
        return cls(**{k: np.asarray(arrays[k], dtype=np.float64) for k in PARAM_KEYS})


@dataclass
class ForwardCache:
    """Intermediate activations kept for the exact backward pass."""

    params: MetaModelParams
    x: np.ndarray
    hidden: np.ndarray   # tanh activations
    sig: np.ndarray      # sigmoid(z) per head


def meta_forward(params: MetaModelParams,
                 x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Generate circuit parameters theta(x) = pi * sigmoid(heads(tanh enc))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.feature_dim,):
        raise DimensionMismatchError(
            f"expected {params.feature_dim} features, got {x.shape}")
    hidden = np.tanh(params.w1 @ x + params.b1)
    z = params.w2 @ hidden + params.b2
    sig = _sigmoid(z)
    theta = np.pi * sig
    return theta, ForwardCache(params=params, x=x, hidden=hidden, sig=sig)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def meta_backward(cache: ForwardCache,
                  dloss_dtheta: np.ndarray) -> dict[str, np.ndarray]:
    """Exact chain rule from d loss/d theta back to all generator weights."""
    params = cache.params
    dloss_dtheta = np.asarray(dloss_dtheta, dtype=np.float64)
    if dloss_dtheta.shape != (params.num_params,):
        raise DimensionMismatchError(
            f"expected {params.num_params} head gradients, got {dloss_dtheta.shape}")
    dz = dloss_dtheta * np.pi * cache.sig * (1.0 - cache.sig)
    dw2 = np.outer(dz, cache.hidden)
    db2 = dz
    dhidden = params.w2.T @ dz
    dpre = dhidden * (1.0 - cache.hidden**2)
    dw1 = np.outer(dpre, cache.x)
    db1 = dpre
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


@dataclass(frozen=True)
class AdamWHyper:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamWState:
    """Bias-corrected moment estimates for a named family of arrays."""

    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step_count: int
    hyper: AdamWHyper

    @classmethod
    def init(cls, params: dict[str, np.ndarray], hyper: AdamWHyper) -> "AdamWState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            step_count=0,
            hyper=hyper,
        )


def adamw_step(state: AdamWState, params: dict[str, np.ndarray],
               grads: dict[str, np.ndarray]
               ) -> tuple[dict[str, np.ndarray], AdamWState]:
    """One AdamW update; weight decay is decoupled from the moment update."""
    hyper = state.hyper
    t = state.step_count + 1
    corr1 = 1.0 - hyper.beta1**t
    corr2 = 1.0 - hyper.beta2**t
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for key, value in params.items():
        g = grads[key]
        if g.shape != value.shape:
            raise DimensionMismatchError(f"gradient shape mismatch for {key!r}")
        m = hyper.beta1 * state.first_moment[key] + (1.0 - hyper.beta1) * g
        v = hyper.beta2 * state.second_moment[key] + (1.0 - hyper.beta2) * g * g
        m_hat = m / corr1
        v_hat = v / corr2
        step = m_hat / (np.sqrt(v_hat) + hyper.eps)
        new_params[key] = value - hyper.learning_rate * (
            step + hyper.weight_decay * value)
        new_m[key] = m
        new_v[key] = v
    return new_params, AdamWState(new_m, new_v, t, hyper)


@dataclass(frozen=True)
class MetaTrainConfig:
    """Hyperparameters of the conditioning loop."""

    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    hidden_dim: int = 64
    batch_size: int = 4
    steps: int = 100
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    sigma_init: float = 0.1
    epsilon_floor: float = 1e-10
    degeneracy_epsilon: float = 1e-6
    fd_step: float = 1e-4
    threads: int = 1

    def hyper(self) -> AdamWHyper:
        return AdamWHyper(self.learning_rate, self.beta1, self.beta2,
                          self.adam_eps, self.weight_decay)


@dataclass
class MetaTraceRow:
    step: int
    summary: SpectralSummary
    grad_norm: float


@dataclass
class MetaTrace:
    """Per-step conditioning record of a meta-training run."""

    rows: list[MetaTraceRow] = field(default_factory=list)

    CSV_HEADER = ("step",) + SpectralSummary.CSV_HEADER + ("grad_norm",)

    def csv_rows(self):
        for row in self.rows:
            yield [row.step] + row.summary.csv_values() + [row.grad_norm]

    def column(self, name: str) -> np.ndarray:
        if name == "grad_norm":
            return np.array([r.grad_norm for r in self.rows])
        return np.array([getattr(r.summary, name) for r in self.rows])


def _theta_loss(theta: np.ndarray, batch: np.ndarray, spec: AnsatzSpec,
                epsilon: float, degeneracy_epsilon: float | None = None
                ) -> tuple[float, SpectralSummary]:
    avg = fs_metric_batch_avg(spec, batch, theta)
    summary = spectral_summary(eigh_symmetric(avg), epsilon, degeneracy_epsilon)
    return summary.log_kappa, summary


def meta_loss(params: MetaModelParams, x_rep: np.ndarray, batch: np.ndarray,
              spec: AnsatzSpec, epsilon: float,
              degeneracy_epsilon: float | None = None
              ) -> tuple[float, SpectralSummary]:
    """log kappa of the batch-averaged block-diagonal metric at theta(x_rep)."""
    theta_rep, _ = meta_forward(params, x_rep)
    return _theta_loss(theta_rep, batch, spec, epsilon, degeneracy_epsilon)


def meta_loss_grad_theta(theta_rep: np.ndarray, batch: np.ndarray,
                         spec: AnsatzSpec, epsilon: float, h: float = 1e-4,
                         threads: int = 1) -> np.ndarray:
    """Central-difference gradient of the conditioning loss w.r.t. the
    generated circuit parameters, at a fixed metric batch.

    Probes whose spectrum collapses below the floor fall back to a one-sided
    difference against the unperturbed loss (and are reported via a warning).
    """
    theta_rep = np.asarray(theta_rep, dtype=np.float64)
    p = theta_rep.shape[0]

    def loss_at(theta: np.ndarray) -> float | None:
        try:
            return _theta_loss(theta, batch, spec, epsilon)[0]
        except DegenerateSpectrumError:
            return None

    def probe(k: int) -> tuple[float | None, float | None]:
        plus = theta_rep.copy()
        plus[k] += h
        minus = theta_rep.copy()
        minus[k] -= h
        return loss_at(plus), loss_at(minus)

    results = parallel_map(probe, range(p), threads)

    grad = np.zeros(p, dtype=np.float64)
    base: float | None = None
    fallbacks = 0
    for k, (lp, lm) in enumerate(results):
        if lp is not None and lm is not None:
            grad[k] = (lp - lm) / (2.0 * h)
            continue
        fallbacks += 1
        if base is None:
            base = loss_at(theta_rep)
        if base is None:
            grad[k] = 0.0
        elif lp is not None:
            grad[k] = (lp - base) / h
        elif lm is not None:
            grad[k] = (base - lm) / h
        else:
            grad[k] = 0.0
    if fallbacks:
        warnings.warn(
            f"{fallbacks} finite-difference probes hit a degenerate spectrum; "
            "used one-sided differences", stacklevel=2)
    return grad


def grad_global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def meta_train(config: MetaTrainConfig, dataset: np.ndarray, seed: int
               ) -> tuple[MetaModelParams, AdamWState, MetaTrace]:
    """Run the conditioning loop; deterministic given (config, seed).

    Each step samples a representative input and a metric batch from the
    dataset, evaluates log kappa of the averaged metric at the generated
    parameters, and updates the generator by AdamW. Aborts with
    BarrenPlateauError after more than 10 consecutive degenerate steps.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise DimensionMismatchError("dataset must be a nonempty (M, d) array")
    spec = config.ansatz
    if dataset.shape[1] != spec.feature_dim:
        raise DimensionMismatchError(
            f"dataset feature width {dataset.shape[1]} != ansatz feature_dim "
            f"{spec.feature_dim}")

    rng = np.random.default_rng(seed)
    params = MetaModelParams.initialize(spec.feature_dim, spec.num_params,
                                        config.hidden_dim, config.sigma_init, rng)
    state = AdamWState.init(params.as_dict(), config.hyper())
    trace = MetaTrace()

    n_rows = dataset.shape[0]
    consecutive_degenerate = 0
    for step in range(1, config.steps + 1):
        x_rep = dataset[int(rng.integers(n_rows))]
        batch_idx = rng.choice(n_rows, size=config.batch_size,
                               replace=n_rows < config.batch_size)
        batch = dataset[batch_idx]

        theta_rep, cache = meta_forward(params, x_rep)
        try:
            loss, summary = _theta_loss(theta_rep, batch, spec,
                                        config.epsilon_floor,
                                        config.degeneracy_epsilon)
        except DegenerateSpectrumError as exc:
            raise BarrenPlateauError(
                f"metric spectrum collapsed at step {step}: {exc}") from exc

        dtheta = meta_loss_grad_theta(theta_rep, batch, spec,
                                      config.epsilon_floor, config.fd_step,
                                      config.threads)
        grads = meta_backward(cache, dtheta)
        grad_norm = grad_global_norm(grads)
        new_params, state = adamw_step(state, params.as_dict(), grads)
        params = MetaModelParams.from_dict(new_params)

        trace.rows.append(MetaTraceRow(step=step, summary=summary,
                                       grad_norm=grad_norm))
        if summary.degenerate:
            consecutive_degenerate += 1
            if consecutive_degenerate > 10:
                raise BarrenPlateauError(
                    f"degenerate metric spectrum for {consecutive_degenerate} "
                    f"consecutive steps (through step {step}); the landscape "
                    "looks like a barren plateau")
        else:
            consecutive_degenerate = 0
        if step % 10 == 0 or step == config.steps:
            logger.info("meta step %d/%d: loss=%.4f grad_norm=%.4f",
                        step, config.steps, loss, grad_norm)

    return params, state, trace


def save_checkpoint(params: MetaModelParams, state: AdamWState | None,
                    path, seed: int | None = None, step: int | None = None,
                    extra: dict | None = None) -> None:
    """Persist generator weights (and optimizer state) as JSON."""
    payload: dict = {
        "version": CHECKPOINT_VERSION,
        "feature_dim": params.feature_dim,
        "hidden_dim": params.hidden_dim,
        "num_params": params.num_params,
        "activation": params.activation,
        "seed": seed,
        "step": step,
        "weights": {k: v.tolist() for k, v in params.as_dict().items()},
    }
    if state is not None:
        payload["optimizer"] = {
            "step_count": state.step_count,
            "hyper": {
                "learning_rate": state.hyper.learning_rate,
                "beta1": state.hyper.beta1,
                "beta2": state.hyper.beta2,
                "eps": state.hyper.eps,
                "weight_decay": state.hyper.weight_decay,
            },
            "first_moment": {k: v.tolist() for k, v in state.first_moment.items()},
            "second_moment": {k: v.tolist() for k, v in state.second_moment.items()},
        }
    if extra:
        payload["extra"] = extra
    from .io_utils import write_json

    write_json(path, payload)


def load_checkpoint(path, feature_dim: int | None = None,
                    num_params: int | None = None
                    ) -> tuple[MetaModelParams, AdamWState | None, dict]:
    """Load a checkpoint; optionally enforce the expected model dimensions."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc

    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version!r} unsupported "
            f"(expected {CHECKPOINT_VERSION})")
    try:
        params = MetaModelParams.from_dict(payload["weights"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc

    if (params.feature_dim != payload["feature_dim"]
            or params.hidden_dim != payload["hidden_dim"]
            or params.num_params != payload["num_params"]):
        raise CheckpointError("checkpoint metadata disagrees with stored weights")
    if feature_dim is not None and params.feature_dim != feature_dim:
        raise CheckpointError(
            f"checkpoint was trained for feature_dim={params.feature_dim}, "
            f"run expects {feature_dim}")
    if num_params is not None and params.num_params != num_params:
        raise CheckpointError(
            f"checkpoint was trained for num_params={params.num_params}, "
            f"run expects {num_params}")

    state = None
    opt = payload.get("optimizer")
    if opt is not None:
        hyper = AdamWHyper(**opt["hyper"])
        state = AdamWState(
            first_moment={k: np.asarray(v, dtype=np.float64)
                          for k, v in opt["first_moment"].items()},
            second_moment={k: np.asarray(v, dtype=np.float64)
                           for k, v in opt["second_moment"].items()},
            step_count=int(opt["step_count"]),
            hyper=hyper,
        )
    meta = {"seed": payload.get("seed"), "step": payload.get("step"),
            "extra": payload.get("extra")}
    return params, state, meta
