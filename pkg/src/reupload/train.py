"""Losses, gradient engines, Adam and the training loop."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import classify, model
from .data import Dataset
from .errors import DegenerateFitError, DegenerateLossError, InvalidArgumentError
from .model import CircuitSpec

FISHER_EPS = 1e-9


# ---------------------------------------------------------------------------
# losses on a batch of readouts


def _class_stats(p, labels):
    p = np.asarray(p, dtype=float)
    y = np.asarray(labels)
    m1, m2 = y == 1, y == 2
    n1, n2 = int(m1.sum()), int(m2.sum())
    if n1 == 0 or n2 == 0:
        raise DegenerateLossError("the loss needs samples of both classes")
    return p, m1, m2, n1, n2


def fisher_lda_loss(p, labels) -> float:
    """Within-class scatter over squared mean separation.

    ``(var1 + var2 + eps) / ((mu1 - mu2)^2 + eps)`` with unbiased class
    variances (a single-sample class contributes zero) and ``eps = 1e-9``.
    Lower is better.
    """
    p, m1, m2, n1, n2 = _class_stats(p, labels)
    mu1, mu2 = p[m1].mean(), p[m2].mean()
    v1 = ((p[m1] - mu1) ** 2).sum() / max(n1 - 1, 1)
    v2 = ((p[m2] - mu2) ** 2).sum() / max(n2 - 1, 1)
    return float((v1 + v2 + FISHER_EPS) / ((mu1 - mu2) ** 2 + FISHER_EPS))


def fisher_lda_loss_grad(p, labels) -> np.ndarray:
    """Derivative of :func:`fisher_lda_loss` with respect to every ``p``."""
    p, m1, m2, n1, n2 = _class_stats(p, labels)
    mu1, mu2 = p[m1].mean(), p[m2].mean()
    d1, d2 = max(n1 - 1, 1), max(n2 - 1, 1)
    a = ((p[m1] - mu1) ** 2).sum() / d1 + ((p[m2] - mu2) ** 2).sum() / d2 + FISHER_EPS
    b = (mu1 - mu2) ** 2 + FISHER_EPS
    da = np.where(m1, 2 * (p - mu1) / d1, 2 * (p - mu2) / d2)
    db = 2 * (mu1 - mu2) * np.where(m1, 1.0 / n1, -1.0 / n2)
    return (da * b - a * db) / b**2


def cross_entropy_loss(p, labels) -> float:
    """Binary cross-entropy with class 1 as the high-``p`` class."""
    p, m1, _, _, _ = _class_stats(p, labels)
    q = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(np.where(m1, np.log(q), np.log1p(-q))))


def cross_entropy_loss_grad(p, labels) -> np.ndarray:
    p, m1, _, _, _ = _class_stats(p, labels)
    q = np.clip(p, 1e-12, 1 - 1e-12)
    return np.where(m1, -1.0 / q, 1.0 / (1.0 - q)) / p.size


@dataclass(frozen=True)
class Loss:
    name: str
    value: Callable
    grad: Callable

    def __call__(self, p, labels) -> float:
        return self.value(p, labels)


FISHER = Loss("fisher", fisher_lda_loss, fisher_lda_loss_grad)
CROSS_ENTROPY = Loss("cross_entropy", cross_entropy_loss, cross_entropy_loss_grad)
LOSSES = {l.name: l for l in (FISHER, CROSS_ENTROPY)}


def get_loss(loss) -> Loss:
    if isinstance(loss, Loss):
        return loss
    try:
        return LOSSES[loss]
    except KeyError:
        raise InvalidArgumentError(f"unknown loss {loss!r}; choose from {sorted(LOSSES)}") from None


def _train_arrays(data):
    if isinstance(data, Dataset):
        return data.train
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y)


def make_objective(loss, spec: CircuitSpec, data, perturb=None) -> Callable:
    """Scalar training loss as a function of the parameter vector.

    The returned callable also accepts a stack ``(S, n_params)`` and then
    returns ``S`` losses.
    """
    loss = get_loss(loss)
    X, y = _train_arrays(data)

    def objective(params):
        P = np.asarray(params, dtype=float)
        p = model.readout_many(spec, np.atleast_2d(P), X)
        if perturb is not None:
            p = perturb(p)
        vals = np.array([loss.value(row, y) for row in p])
        return float(vals[0]) if P.ndim == 1 else vals

    return objective


# ---------------------------------------------------------------------------
# gradients


class GradientMode(str, enum.Enum):
    PARAM_SHIFT = "param_shift"
    FD_FORWARD = "fd_forward"
    FD_BACKWARD = "fd_backward"
    FD_CENTRAL = "fd_central"
    FD_MIXED = "fd_mixed"


def grad_param_shift(loss, spec: CircuitSpec, params, data, perturb=None) -> tuple[float, np.ndarray]:
    """Loss and its gradient from parameter-shifted circuit evaluations.

    Each readout derivative comes from the two-term shift rule (see
    :func:`reupload.model.param_shift_jacobian`); the loss is then chained
    analytically through the batch of readouts.

    Returns:
        ``(loss_value, gradient)``.
    """
    loss = get_loss(loss)
    X, y = _train_arrays(data)
    p0, jac = model.param_shift_jacobian(spec, params, X, perturb=perturb)
    return loss.value(p0, y), jac.T @ loss.grad(p0, y)


def grad_finite_diff(loss, spec: CircuitSpec, params, data, mode=GradientMode.FD_CENTRAL, h: float = 1e-3,
                     iteration: int = 0, mixed_every: int = 10, perturb=None) -> tuple[float, np.ndarray]:
    """Finite-difference gradient of the scalar training loss.

    ``fd_mixed`` uses backward differences, switching to central differences
    on every ``mixed_every``-th iteration.

    Returns:
        ``(loss_value, gradient)``.
    """
    if not h > 0:
        raise InvalidArgumentError("finite-difference step must be positive")
    mode = GradientMode(mode)
    if mode is GradientMode.FD_MIXED:
        mode = GradientMode.FD_CENTRAL if iteration % mixed_every == 0 else GradientMode.FD_BACKWARD
    params = model.check_params(spec, params)
    return finite_difference(make_objective(loss, spec, data, perturb=perturb), params, mode, h)


def finite_difference(f: Callable, params, mode=GradientMode.FD_CENTRAL, h: float = 1e-3) -> tuple[float, np.ndarray]:
    """One-sided or central differences of a stack-evaluable objective ``f``.

    ``f`` maps an ``(S, n)`` stack of points to ``S`` values; all shifted
    points are evaluated in a single call.
    """
    if not h > 0:
        raise InvalidArgumentError("finite-difference step must be positive")
    mode = GradientMode(mode)
    params = np.asarray(params, dtype=float)
    eye = np.eye(params.size) * h
    if mode is GradientMode.FD_FORWARD:
        vals = f(np.vstack([params, params + eye]))
        return vals[0], (vals[1:] - vals[0]) / h
    if mode is GradientMode.FD_BACKWARD:
        vals = f(np.vstack([params, params - eye]))
        return vals[0], (vals[0] - vals[1:]) / h
    if mode is GradientMode.FD_CENTRAL:
        vals = f(np.vstack([params, params + eye, params - eye]))
        n = params.size
        return vals[0], (vals[1:n + 1] - vals[n + 1:]) / (2 * h)
    raise InvalidArgumentError(f"{mode} is not a finite-difference mode")


# ---------------------------------------------------------------------------
# Adam


@dataclass
class TrainConfig:
    max_iters: int = 10000
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    gradient_mode: GradientMode = GradientMode.PARAM_SHIFT
    fd_step: float = 1e-3
    mixed_every: int = 10
    convergence_tol: float = 1e-7
    convergence_window: int = 50
    seed: int = 0
    loss: str = "fisher"
    priors: str = "empirical"
    trajectory_every: int = 10
    noisy_training_counts: int | None = None

    def __post_init__(self):
        self.gradient_mode = GradientMode(self.gradient_mode)
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise InvalidArgumentError("Adam betas must lie in (0, 1)")
        if self.convergence_window < 1 or self.trajectory_every < 1:
            raise InvalidArgumentError("window and trajectory stride must be >= 1")
        get_loss(self.loss)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["gradient_mode"] = self.gradient_mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown train options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def init(cls, params) -> "AdamState":
        params = np.asarray(params, dtype=float).copy()
        return cls(params, np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(state: AdamState, gradient, config: TrainConfig) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; the input state is not modified."""
    g = np.asarray(gradient, dtype=float)
    if g.shape != state.params.shape or state.m.shape != g.shape or state.v.shape != g.shape:
        raise InvalidArgumentError(f"gradient shape {g.shape} does not match state {state.params.shape}")
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    m = b1 * state.m + (1 - b1) * g
    v = b2 * state.v + (1 - b2) * g * g
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    new = state.params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new, AdamState(new, m, v, t)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainReport:
    spec: CircuitSpec
    config: TrainConfig
    loss_trajectory: list[float]
    param_trajectory: list[list[float]]
    trajectory_iterations: list[int]
    final_params: list[float]
    final_threshold: classify.LdaModel
    train_accuracy: float
    test_accuracy: float | None
    initial_train_accuracy: float
    iterations_run: int
    converged: bool
    dataset_meta: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.loss_trajectory[-1]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "config": self.config.to_dict(),
            "loss_trajectory": list(self.loss_trajectory),
            "param_trajectory": [list(p) for p in self.param_trajectory],
            "trajectory_iterations": list(self.trajectory_iterations),
            "final_params": list(self.final_params),
            "final_threshold": self.final_threshold.to_dict(),
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "initial_train_accuracy": self.initial_train_accuracy,
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "dataset_meta": self.dataset_meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        return cls(
            spec=CircuitSpec.from_dict(d["spec"]),
            config=TrainConfig.from_dict(d["config"]),
            loss_trajectory=[float(v) for v in d["loss_trajectory"]],
            param_trajectory=[[float(v) for v in p] for p in d["param_trajectory"]],
            trajectory_iterations=[int(i) for i in d["trajectory_iterations"]],
            final_params=[float(v) for v in d["final_params"]],
            final_threshold=classify.LdaModel.from_dict(d["final_threshold"]),
            train_accuracy=float(d["train_accuracy"]),
            test_accuracy=None if d["test_accuracy"] is None else float(d["test_accuracy"]),
            initial_train_accuracy=float(d["initial_train_accuracy"]),
            iterations_run=int(d["iterations_run"]),
            converged=bool(d["converged"]),
            dataset_meta=d.get("dataset_meta", {}),
        )

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "TrainReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def write_loss_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loss"])
            for i, v in enumerate(self.loss_trajectory):
                w.writerow([i, repr(float(v))])

    def write_param_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration"] + [f"xi{i}" for i in range(len(self.final_params))])
            for it, p in zip(self.trajectory_iterations, self.param_trajectory):
                w.writerow([it] + [repr(float(v)) for v in p])


def _fit_or_fallback(p, y, priors) -> classify.LdaModel:
    try:
        return classify.fit_lda(p, y, priors=priors)
    except DegenerateFitError as err:
        if err.model is None:
            raise
        return err.model


def _perturber(config: TrainConfig):
    if config.noisy_training_counts is None:
        return None
    from .noise import sample_probabilities

    rng = np.random.default_rng([config.seed, 0x5EED])
    counts = config.noisy_training_counts
    return lambda p: sample_probabilities(p, counts, rng)


def train(spec: CircuitSpec, dataset: Dataset, config: TrainConfig | None = None) -> TrainReport:
    """Train the circuit's phases with Adam on the training split.

    Parameters start uniform in ``[0, 2 pi)`` from ``config.seed``. The loop
    stops after ``max_iters`` updates or once the best loss has improved by
    less than ``convergence_tol`` over the last ``convergence_window``
    iterations. An LDA threshold is then fitted on the final training
    readouts.
    """
    config = config or TrainConfig()
    if not dataset.has_both_classes():
        raise DegenerateFitError("training split must contain both classes")
    loss = get_loss(config.loss)
    X, y = dataset.train
    rng = np.random.default_rng(config.seed)
    params = rng.uniform(0.0, 2 * np.pi, spec.n_params)
    state = AdamState.init(params)
    perturb = _perturber(config)

    init_p = model.readout(spec, params, X)
    init_lda = _fit_or_fallback(init_p, y, config.priors)
    initial_acc = classify.accuracy(classify.predict(init_lda, init_p), y)

    losses: list[float] = []
    best: list[float] = []
    traj, traj_it = [], []
    converged = False
    it = 0
    while True:
        if config.gradient_mode is GradientMode.PARAM_SHIFT:
            value, grad = grad_param_shift(loss, spec, params, (X, y), perturb=perturb)
        else:
            value, grad = grad_finite_diff(loss, spec, params, (X, y), config.gradient_mode, config.fd_step,
                                           iteration=it, mixed_every=config.mixed_every, perturb=perturb)
        losses.append(float(value))
        best.append(min(best[-1], value) if best else float(value))
        if it % config.trajectory_every == 0:
            traj.append(params.tolist())
            traj_it.append(it)
        w = config.convergence_window
        if it >= w and best[it - w] - best[it] < config.convergence_tol:
            converged = True
            break
        if it == config.max_iters:
            break
        params, state = adam_step(state, grad, config)
        it += 1
    if traj_it[-1] != it:
        traj.append(params.tolist())
        traj_it.append(it)

    p_train = model.readout(spec, params, X)
    lda = _fit_or_fallback(p_train, y, config.priors)
    train_acc = classify.accuracy(classify.predict(lda, p_train), y)
    test_acc = None
    Xt, yt = dataset.test
    if len(yt):
        test_acc = classify.accuracy(classify.predict(lda, model.readout(spec, params, Xt)), yt)
    return TrainReport(
        spec=spec,
        config=config,
        loss_trajectory=losses,
        param_trajectory=traj,
        trajectory_iterations=traj_it,
        final_params=params.tolist(),
        final_threshold=lda,
        train_accuracy=train_acc,
        test_accuracy=test_acc,
        initial_train_accuracy=initial_acc,
        iterations_run=it,
        converged=converged,
        dataset_meta=dataset.meta,
    )


def train_seeds(spec: CircuitSpec, dataset: Dataset, config: TrainConfig, seeds) -> list[TrainReport]:
    out = []
    for s in seeds:
        cfg = TrainConfig.from_dict(dict(config.to_dict(), seed=int(s)))
        out.append(train(spec, dataset, cfg))
    return out


def summarize(reports: list[TrainReport]) -> dict:
    """Best-of-seeds (by training accuracy, then final loss) and mean figures."""
    best = max(reports, key=lambda r: (r.train_accuracy, -r.final_loss))
    tests = [r.test_accuracy for r in reports if r.test_accuracy is not None]
    return {
        "n_seeds": len(reports),
        "best_seed": best.config.seed,
        "best_train_accuracy": best.train_accuracy,
        "best_test_accuracy": best.test_accuracy,
        "max_test_accuracy": max(tests) if tests else None,
        "mean_train_accuracy": float(np.mean([r.train_accuracy for r in reports])),
        "mean_test_accuracy": float(np.mean(tests)) if tests else None,
    }
