"""One-dimensional LDA on readout probabilities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateFitError, InvalidArgumentError


@dataclass(frozen=True)
class LdaModel:
    """Single threshold on ``p``.

    A sample is class 1 iff ``orientation * (p - threshold) >= 0``.
    """

    threshold: float
    orientation: int
    class_means: tuple[float, float]
    pooled_variance: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_means"] = list(self.class_means)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LdaModel":
        return cls(
            threshold=float(d["threshold"]),
            orientation=int(d["orientation"]),
            class_means=tuple(float(m) for m in d["class_means"]),
            pooled_variance=float(d["pooled_variance"]),
            degenerate=bool(d.get("degenerate", False)),
        )


def _split_classes(p_values, labels):
    p = np.asarray(p_values, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise InvalidArgumentError(f"{p.size} p-values but {y.size} labels")
    if not np.all(np.isin(y, (1, 2))):
        raise InvalidArgumentError("labels must be 1 or 2")
    return p[y == 1], p[y == 2]


def fit_lda(p_values, labels, priors: str = "empirical") -> LdaModel:
    """Fit the equal-variance Gaussian threshold.

    ``tau = (mu1 + mu2)/2 + var * ln(pi2/pi1) / (mu1 - mu2)`` with the pooled
    within-class variance ``var`` and class priors ``pi`` either estimated
    from the counts (``"empirical"``) or equal (``"uniform"``).

    Raises:
        DegenerateFitError: a class is missing, or both means coincide. In
            the latter case ``err.model`` holds a fallback with
            ``threshold = mu1`` and ``degenerate=True``.
    """
    p1, p2 = _split_classes(p_values, labels)
    if p1.size == 0 or p2.size == 0:
        raise DegenerateFitError("LDA needs samples of both classes")
    if priors not in ("empirical", "uniform"):
        raise InvalidArgumentError(f"unknown priors {priors!r}")
    mu1, mu2 = float(p1.mean()), float(p2.mean())
    n1, n2 = p1.size, p2.size
    scatter = float(((p1 - mu1) ** 2).sum() + ((p2 - mu2) ** 2).sum())
    var = scatter / max(n1 + n2 - 2, 1)
    if mu1 == mu2:
        fallback = LdaModel(mu1, 1, (mu1, mu2), var, degenerate=True)
        raise DegenerateFitError("class means coincide; threshold is undetermined", model=fallback)
    log_ratio = math.log(n2 / n1) if priors == "empirical" else 0.0
    tau = 0.5 * (mu1 + mu2) + var * log_ratio / (mu1 - mu2)
    return LdaModel(
        threshold=float(tau),
        orientation=1 if mu1 > mu2 else -1,
        class_means=(mu1, mu2),
        pooled_variance=var,
    )


def predict(model: LdaModel, p):
    """Class 1 or 2 for a scalar or an array of probabilities; ``p == tau``
    goes to class 1."""
    p_arr = np.asarray(p, dtype=float)
    out = np.where(model.orientation * (p_arr - model.threshold) >= 0, 1, 2)
    return int(out) if out.ndim == 0 else out


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions).ravel()
    labels = np.asarray(labels).ravel()
    if predictions.shape != labels.shape:
        raise InvalidArgumentError(f"{predictions.size} predictions but {labels.size} labels")
    if labels.size == 0:
        raise InvalidArgumentError("accuracy of an empty set")
    return float(np.mean(predictions == labels))
