"""Finite photon statistics.

A readout ``p`` is replaced by the post-selected estimate ``N0 / (N0 + N1)``
with ``N0 ~ Poisson(N p)`` and ``N1 ~ Poisson(N (1 - p))``; draws where no
detector clicked are repeated. ``mode="binomial"`` instead fixes the total
at ``N`` and draws ``N0 ~ Binomial(N, p)``, the same law conditioned on the
total.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classify, model
from .classify import LdaModel
from .data import TEST, Dataset
from .errors import InvalidArgumentError
from .model import CircuitSpec


@dataclass
class NoiseConfig:
    total_counts: int = 10_000
    mc_repetitions: int = 1000
    seed: int = 0
    mode: str = "poisson"

    def __post_init__(self):
        if self.total_counts < 1:
            raise InvalidArgumentError("total_counts must be >= 1")
        if self.mc_repetitions < 1:
            raise InvalidArgumentError("mc_repetitions must be >= 1")
        if self.mode not in ("poisson", "binomial"):
            raise InvalidArgumentError(f"unknown noise mode {self.mode!r}")


@dataclass
class NoiseReport:
    mean_accuracy: float
    accuracy_sd: float
    accuracies: list[float]
    noiseless_accuracy: float
    total_counts: int
    single_repetition: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean_accuracy": self.mean_accuracy,
            "accuracy_sd": self.accuracy_sd,
            "accuracies": list(self.accuracies),
            "noiseless_accuracy": self.noiseless_accuracy,
            "total_counts": self.total_counts,
            "single_repetition": self.single_repetition,
            "meta": self.meta,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["repetition", "accuracy"])
            for i, a in enumerate(self.accuracies):
                w.writerow([i, repr(float(a))])


def sample_probabilities(p, total_counts: int, rng, mode: str = "poisson") -> np.ndarray:
    """Shot-noise estimate of every entry of ``p`` (any shape)."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    if mode == "binomial":
        return rng.binomial(total_counts, p) / total_counts
    n0 = rng.poisson(total_counts * p).astype(float)
    n1 = rng.poisson(total_counts * (1.0 - p)).astype(float)
    empty = (n0 + n1) == 0
    while np.any(empty):
        n0[empty] = rng.poisson(total_counts * p[empty])
        n1[empty] = rng.poisson(total_counts * (1.0 - p[empty]))
        empty = (n0 + n1) == 0
    return n0 / (n0 + n1)


def sample_probability(p: float, config: NoiseConfig, rng) -> float:
    """Shot-noise estimate of a single readout probability."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p}")
    return float(sample_probabilities(np.array([p]), config.total_counts, rng, config.mode)[0])


def mc_accuracy(spec: CircuitSpec, params, lda_model: LdaModel, dataset: Dataset, config: NoiseConfig,
                split: str = TEST) -> NoiseReport:
    """Accuracy spread under shot noise.

    Each repetition resamples every readout of the chosen split and
    reapplies the fixed threshold. Repetition ``r`` uses the stream
    ``default_rng([seed, r])``, so results do not depend on evaluation order.
    """
    X, y = dataset.part(split)
    if len(y) == 0:
        raise InvalidArgumentError(f"dataset has no {split!r} rows")
    p = model.readout(spec, params, X)
    clean = classify.accuracy(classify.predict(lda_model, p), y)
    accs = []
    for r in range(config.mc_repetitions):
        rng = np.random.default_rng([config.seed, r])
        p_hat = sample_probabilities(p, config.total_counts, rng, config.mode)
        accs.append(classify.accuracy(classify.predict(lda_model, p_hat), y))
    accs = np.array(accs)
    single = accs.size == 1
    return NoiseReport(
        mean_accuracy=float(accs.mean()),
        accuracy_sd=0.0 if single else float(accs.std(ddof=1)),
        accuracies=accs.tolist(),
        noiseless_accuracy=clean,
        total_counts=config.total_counts,
        single_repetition=single,
        meta={"split": split, "repetitions": config.mc_repetitions, "seed": config.seed, "mode": config.mode},
    )
