"""Learning-theory checks: closed-form decision functions, shattering,
Hessian sharpness, loss-landscape slices and Fourier spectra."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import data, model, train
from .errors import (
    InvalidArgumentError,
    NumericalFailureError,
    UndefinedClassifierError,
    UnsupportedDimensionError,
)
from .model import CircuitSpec, Scheme

TWO_PI = 2 * math.pi
WITNESS_MARGIN = 1e-9  # separations below this are treated as rounding noise


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# one-layer closed form


def one_layer_coeffs(theta1: float, theta2: float, t: float) -> tuple[float, float, float]:
    """Coefficients of the one-layer original decision ``a + b cos x + c sin x``.

    The layer is the encoding gate ``mzi(x, 0)`` followed by the trainable
    gate ``mzi(theta2, theta1)``. Its readout satisfies
    ``p0 - p1 = -cos(theta2) cos(x) - cos(theta1) sin(theta2) sin(x)``, so
    thresholding ``p0`` at ``(1 - t)/2`` is the sign of
    ``t - cos(theta2) cos(x) - cos(theta1) sin(theta2) sin(x)``.
    """
    vals = (theta1, theta2, t)
    if not all(math.isfinite(v) for v in vals):
        raise InvalidArgumentError("coefficients need finite inputs")
    a = float(t)
    b = -math.cos(theta2)
    c = -0.5 * (math.sin(theta1 + theta2) - math.sin(theta1 - theta2))
    return a, b, c


def one_layer_spec() -> CircuitSpec:
    """The single-feature, single-layer original circuit with unit encoding scale."""
    return CircuitSpec(Scheme.ORIGINAL, 1, 1, encode_scale=1.0)


def one_layer_params(theta1: float, theta2: float) -> np.ndarray:
    """Parameter vector of :func:`one_layer_spec` for ``(theta1, theta2)``."""
    return np.array([theta2, theta1], dtype=float)


def one_layer_threshold(t: float) -> float:
    return (1.0 - t) / 2.0


@dataclass(frozen=True)
class IntervalClassifier:
    """Sign of ``a + b cos x + c sin x`` as a periodic interval.

    For ``kind == "interval"`` the function is positive on the open arc
    ``(center - half_width, center + half_width)`` mod 2 pi and negative on
    its complement; ``alpha`` and ``beta`` are the two sign changes
    ``center + half_width`` and ``center + 2 pi - half_width``.
    For ``kind == "constant"`` the sign is ``constant_sign`` everywhere
    (except possibly a single touching point).
    """

    kind: str
    center: float = 0.0
    half_width: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    constant_sign: int = 0

    def positive(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self.constant_sign > 0)
        d = np.mod(x - self.center + math.pi, TWO_PI) - math.pi
        return np.abs(d) < self.half_width

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": self.center,
            "half_width": self.half_width,
            "alpha": self.alpha,
            "beta": self.beta,
            "constant_sign": self.constant_sign,
        }


def interval_from_coeffs(a: float, b: float, c: float) -> IntervalClassifier:
    """Write ``sign[a + R cos(x - phi)]`` as a periodic interval.

    Raises:
        UndefinedClassifierError: all three coefficients vanish.
    """
    if a == 0 and b == 0 and c == 0:
        raise UndefinedClassifierError("a = b = c = 0 defines no classifier")
    r = math.hypot(b, c)
    if abs(a) >= r:
        return IntervalClassifier("constant", constant_sign=1 if a > 0 else -1)
    phi = math.atan2(c, b)
    half = math.acos(-a / r)
    return IntervalClassifier(
        "interval",
        center=phi,
        half_width=half,
        alpha=phi + half,
        beta=phi + TWO_PI - half,
    )


# ---------------------------------------------------------------------------
# shattering


@dataclass(frozen=True)
class HypothesisFamily:
    """A binary hypothesis class over real inputs.

    ``periodic_interval``: unions of ``layers`` arcs of the circle ``x mod 2 pi``.
    ``sinusoid``: ``1`` iff ``cos(omega x) < 0``, i.e. a single compressed
    gate reads ``p0 < 1/2``; ``omega`` ranges over ``[0, omega_max]``.
    ``original_circuit`` / ``compressed_circuit``: a single-feature circuit
    whose readout is cut by a free threshold with free orientation.
    """

    kind: str
    layers: int = 1
    spec: CircuitSpec | None = None
    omega_max: float = TWO_PI
    param_low: float = 0.0
    param_high: float = TWO_PI

    def __post_init__(self):
        if self.kind not in ("periodic_interval", "sinusoid", "original_circuit", "compressed_circuit"):
            raise InvalidArgumentError(f"unknown hypothesis family {self.kind!r}")
        if self.layers < 1:
            raise InvalidArgumentError("layers must be >= 1")
        if self.kind.endswith("_circuit") and (self.spec is None or self.spec.n_features != 1):
            raise InvalidArgumentError("circuit families need a single-feature spec")

    @classmethod
    def periodic_interval(cls, layers: int) -> "HypothesisFamily":
        return cls("periodic_interval", layers=layers)

    @classmethod
    def sinusoid(cls, omega_max: float = TWO_PI) -> "HypothesisFamily":
        return cls("sinusoid", omega_max=omega_max)

    @classmethod
    def circuit(cls, spec: CircuitSpec, low: float = 0.0, high: float = TWO_PI) -> "HypothesisFamily":
        kind = "original_circuit" if spec.scheme is Scheme.ORIGINAL else "compressed_circuit"
        return cls(kind, layers=spec.n_layers, spec=spec, param_low=low, param_high=high)

    @property
    def n_params(self) -> int:
        if self.kind == "sinusoid":
            return 1
        if self.kind == "periodic_interval":
            return 2 * self.layers
        return self.spec.n_params

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "sinusoid":
            return np.array([0.0]), np.array([self.omega_max])
        return np.full(self.n_params, self.param_low), np.full(self.n_params, self.param_high)


@dataclass
class ShatterResult:
    """Outcome of a shattering search.

    ``status`` is ``"shattered"``, ``"not_shattered"`` (proved by a counting
    argument) or ``"inconclusive"`` (the search ran out of budget).
    """

    points: list[float]
    status: str
    witness_params: dict[tuple[int, ...], list[float]] = field(default_factory=dict)
    failing_labeling: tuple[int, ...] | None = None
    undecided: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def shattered(self) -> bool | None:
        if self.status == "inconclusive":
            return None
        return self.status == "shattered"

    def to_dict(self) -> dict:
        return {
            "points": list(self.points),
            "status": self.status,
            "shattered": self.shattered,
            "witness_params": {"".join(map(str, k)): v for k, v in sorted(self.witness_params.items())},
            "failing_labeling": list(self.failing_labeling) if self.failing_labeling is not None else None,
            "undecided": ["".join(map(str, u)) for u in self.undecided],
        }

    def to_json(self, path) -> None:
        _dump_json(self.to_dict(), path)


def circular_runs(points, labels) -> int:
    """Number of maximal runs of 1s once the points are sorted on the circle.

    Returns -1 if two points coincide mod 2 pi with different labels.
    """
    ang = np.mod(np.asarray(points, dtype=float), TWO_PI)
    y = np.asarray(labels, dtype=int)
    order = np.lexsort((y, ang))
    ang, y = ang[order], y[order]
    same = np.isclose(np.diff(ang), 0.0, atol=1e-12)
    if np.any(same & (np.diff(y) != 0)):
        return -1
    if y.size and abs(ang[-1] - ang[0] - TWO_PI) < 1e-12 and y[-1] != y[0]:
        return -1
    if np.all(y == 1):
        return 0
    return int(np.sum((y == 1) & (np.roll(y, 1) == 0)))


def _interval_witness(points, labels) -> list[float] | None:
    """Arc endpoints ``[start_1, end_1, ...]`` covering exactly the 1-labeled
    points, or None if the runs cannot be separated."""
    ang = np.mod(np.asarray(points, dtype=float), TWO_PI)
    y = np.asarray(labels, dtype=int)
    order = np.argsort(ang, kind="stable")
    ang, y = ang[order], y[order]
    m = ang.size
    if np.all(y == 1):
        return [0.0, TWO_PI]
    if np.all(y == 0):
        return []
    ext = np.concatenate([ang, ang[:1] + TWO_PI])
    mids = (ext[:-1] + ext[1:]) / 2  # mids[i] sits between point i and i+1
    arcs = []
    for i in range(m):
        if y[i] == 1 and y[i - 1] == 0:
            j = i
            while y[(j + 1) % m] == 1:
                j += 1
            arcs += [float(mids[i - 1] if i > 0 else mids[-1] - TWO_PI), float(mids[j % m] + TWO_PI * (j // m))]
    return arcs


def arcs_contain(arcs, x) -> np.ndarray:
    """Membership of ``x`` in a union of arcs ``[s1, e1, s2, e2, ...]`` mod 2 pi."""
    x = np.mod(np.asarray(x, dtype=float), TWO_PI)
    out = np.zeros(x.shape, dtype=bool)
    for s, e in zip(arcs[::2], arcs[1::2]):
        if e - s >= TWO_PI:
            out[:] = True
        else:
            out |= np.mod(x - s, TWO_PI) < (e - s)
    return out


def _family_scores(family: HypothesisFamily, P: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Readouts ``(S, m)`` for candidate parameters ``P``."""
    if family.kind == "sinusoid":
        return 0.5 * (1.0 + np.cos(P[:, :1] * x[None, :]))
    return model.readout_many(family.spec, P, x[:, None])


def _margin(family: HypothesisFamily, scores: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Largest separation achievable for each candidate; positive means the
    labeling is realized."""
    one, zero = y == 1, y == 0
    big = np.inf
    if family.kind == "sinusoid":
        lo1 = np.min(np.where(one, 0.5 - scores, big), axis=1)
        lo0 = np.min(np.where(zero, scores - 0.5, big), axis=1)
        return np.minimum(lo1, lo0)
    if not one.any() or not zero.any():
        return np.full(scores.shape[0], big)
    max1 = np.max(np.where(one, scores, -big), axis=1)
    min1 = np.min(np.where(one, scores, big), axis=1)
    max0 = np.max(np.where(zero, scores, -big), axis=1)
    min0 = np.min(np.where(zero, scores, big), axis=1)
    return np.maximum(min1 - max0, min0 - max1) / 2


def _candidates(family: HypothesisFamily, budget: int, rng) -> np.ndarray:
    lo, hi = family.bounds()
    d = lo.size
    if 64 ** d <= budget:
        axes = [np.linspace(lo[k], hi[k], 64, endpoint=family.kind == "sinusoid") for k in range(d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return rng.uniform(lo, hi, size=(budget, d))


def _coordinate_descent(family, x, y, p0, sweeps: int = 30) -> tuple[np.ndarray, float]:
    lo, hi = family.bounds()
    best = p0.copy()
    best_m = float(_margin(family, _family_scores(family, best[None, :], x), y)[0])
    step = (hi - lo) / 64
    for _ in range(sweeps):
        if best_m > WITNESS_MARGIN:
            break
        improved = False
        for k in range(best.size):
            trial = np.repeat(best[None, :], 9, axis=0)
            trial[:, k] += np.linspace(-step[k], step[k], 9)
            m = _margin(family, _family_scores(family, trial, x), y)
            i = int(np.argmax(m))
            if m[i] > best_m:
                best, best_m, improved = trial[i], float(m[i]), True
        if not improved:
            step = step / 4
    return best, best_m


def shatter_check(family: HypothesisFamily, points, search_budget: int = 4096, seed: int = 0) -> ShatterResult:
    """Try every labeling of ``points`` against ``family``.

    Periodic-interval families are decided exactly: a labeling is realizable
    iff its 1s form at most ``layers`` runs around the circle. Circuit and
    sinusoid families are searched on a 64-point-per-parameter grid (random
    samples when the grid exceeds ``search_budget``) refined by coordinate
    descent; a labeling the search cannot realize leaves the result
    inconclusive rather than negative.
    """
    pts = np.asarray(points, dtype=float).ravel()
    if pts.size > 12:
        raise InvalidArgumentError("at most 12 points (4096 labelings)")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("points must be finite")
    result = ShatterResult(points=pts.tolist(), status="shattered")
    rng = np.random.default_rng(seed)
    cand = None if family.kind == "periodic_interval" else _candidates(family, search_budget, rng)
    scores = None if cand is None else _family_scores(family, cand, pts)
    for lab in itertools.product((0, 1), repeat=pts.size):
        y = np.array(lab)
        if family.kind == "periodic_interval":
            runs = circular_runs(pts, y)
            if runs < 0 or runs > family.layers:
                result.status = "not_shattered"
                result.failing_labeling = lab
                result.witness_params = {}
                return result
            result.witness_params[lab] = _interval_witness(pts, y)
            continue
        m = _margin(family, scores, y)
        i = int(np.argmax(m))
        params, best_m = cand[i], float(m[i])
        if best_m <= WITNESS_MARGIN:
            params, best_m = _coordinate_descent(family, pts, y, params)
        if best_m > WITNESS_MARGIN:
            result.witness_params[lab] = [float(v) for v in params]
        else:
            result.undecided.append(lab)
    if result.undecided:
        result.status = "inconclusive"
        result.witness_params = {}
    return result


def alternating_labels(m: int) -> tuple[int, ...]:
    return tuple(i % 2 for i in range(m))


def generic_points(m: int) -> np.ndarray:
    """``m`` distinct points spread over one period, offset off the grid."""
    return TWO_PI * (np.arange(m) + 0.37) / m


@dataclass
class VcRow:
    layers: int
    largest_shattered: int
    smallest_alternating_failure: int


def vc_profile(max_layers: int) -> list[VcRow]:
    """Largest shattered set size and first alternating failure per layer count."""
    if not 1 <= max_layers <= 4:
        raise InvalidArgumentError("max_layers must lie in 1..4")
    rows = []
    for ell in range(1, max_layers + 1):
        fam = HypothesisFamily.periodic_interval(ell)
        m = 1
        while shatter_check(fam, generic_points(m)).shattered:
            m += 1
        fail = m
        while circular_runs(generic_points(fail), alternating_labels(fail)) <= ell:
            fail += 1
        rows.append(VcRow(ell, m - 1, fail))
    return rows


def write_vc_csv(rows: list[VcRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layers", "largest_shattered", "smallest_alternating_failure", "expected"])
        for r in rows:
            w.writerow([r.layers, r.largest_shattered, r.smallest_alternating_failure, 2 * r.layers + 1])


# ---------------------------------------------------------------------------
# sharpness


@dataclass
class SharpnessReport:
    largest_hessian_eigenvalue: float
    hessian_dim: int
    fd_step: list[float]
    params_at_min: list[float]
    gradient_norm: float
    loss_at_min: float
    method: str
    iterations: int = 0
    hessian: list[list[float]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "largest_hessian_eigenvalue": self.largest_hessian_eigenvalue,
            "hessian_dim": self.hessian_dim,
            "fd_step": list(self.fd_step),
            "params_at_min": list(self.params_at_min),
            "gradient_norm": self.gradient_norm,
            "loss_at_min": self.loss_at_min,
            "method": self.method,
            "iterations": self.iterations,
            "hessian": self.hessian,
            "meta": self.meta,
        }

    def to_json(self, path) -> None:
        _dump_json(self.to_dict(), path)


def _steps(fd_step, dim: int) -> np.ndarray:
    h = np.broadcast_to(np.asarray(fd_step, dtype=float), (dim,)).copy()
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise InvalidArgumentError("fd_step must be positive and finite")
    return h


def fd_gradient(loss_fn: Callable, x, fd_step=1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _steps(fd_step, x.size)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        g[i] = (loss_fn(x + e) - loss_fn(x - e)) / (2 * h[i])
    return g


def fd_hessian(loss_fn: Callable, x, fd_step=1e-4) -> np.ndarray:
    """Symmetrized central second differences, one step per coordinate.

    Raises:
        NumericalFailureError: an entry is not finite.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _steps(fd_step, n)
    f0 = loss_fn(x)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (loss_fn(x + ei) - 2 * f0 + loss_fn(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = (
                loss_fn(x + ei + ej) - loss_fn(x + ei - ej) - loss_fn(x - ei + ej) + loss_fn(x - ei - ej)
            ) / (4 * h[i] * h[j])
            H[j, i] = H[i, j]
    bad = np.argwhere(~np.isfinite(H))
    if bad.size:
        i, j = bad[0]
        raise NumericalFailureError(f"Hessian entry ({i}, {j}) is not finite")
    return 0.5 * (H + H.T)


def largest_eigenvalue_closed_form(H: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix of size 1, 2 or 3."""
    n = H.shape[0]
    if n == 1:
        return float(H[0, 0])
    if n == 2:
        tr = H[0, 0] + H[1, 1]
        disc = math.hypot(H[0, 0] - H[1, 1], 2 * H[0, 1])
        return float(0.5 * (tr + disc))
    if n == 3:
        # trigonometric solution of the characteristic cubic
        p1 = H[0, 1] ** 2 + H[0, 2] ** 2 + H[1, 2] ** 2
        q = np.trace(H) / 3
        if p1 == 0:
            return float(np.max(np.diag(H)))
        p2 = np.sum((np.diag(H) - q) ** 2) + 2 * p1
        p = math.sqrt(p2 / 6)
        B = (H - q * np.eye(3)) / p
        r = min(1.0, max(-1.0, np.linalg.det(B) / 2))
        return float(q + 2 * p * math.cos(math.acos(r) / 3))
    raise InvalidArgumentError("closed form only for dimension <= 3")


def largest_eigenvalue_power(H: np.ndarray, tol: float = 1e-6, max_iter: int = 10_000, seed: int = 0) -> tuple[float, int]:
    """Power iteration on ``H + s I`` with ``s`` from a Gershgorin bound, so
    the dominant eigenvalue is the largest one."""
    n = H.shape[0]
    radii = np.sum(np.abs(H), axis=1) - np.abs(np.diag(H))
    shift = max(0.0, -float(np.min(np.diag(H) - radii)))
    A = H + shift * np.eye(n)
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ A @ v)
    for it in range(1, max_iter + 1):
        w = A @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return -shift, it
        v = w / nrm
        new = float(v @ A @ v)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new - shift, it
        lam = new
    return lam - shift, max_iter


def sharpness(loss_fn: Callable, spec: CircuitSpec | None, params_at_min, fd_step=1e-4) -> SharpnessReport:
    """Largest Hessian eigenvalue of ``loss_fn`` at ``params_at_min``.

    ``fd_step`` may be a scalar or one step per coordinate; the steps are
    recorded in the report together with the gradient norm at the point.
    """
    x = np.asarray(params_at_min, dtype=float).ravel()
    if spec is not None and x.size != spec.n_params:
        raise InvalidArgumentError(f"expected {spec.n_params} parameters, got {x.size}")
    h = _steps(fd_step, x.size)
    H = fd_hessian(loss_fn, x, h)
    if x.size <= 3:
        lam, method, iters = largest_eigenvalue_closed_form(H), "closed_form", 0
    else:
        lam, iters = largest_eigenvalue_power(H)
        method = "power_iteration"
    if not math.isfinite(lam):
        raise NumericalFailureError("largest eigenvalue is not finite")
    return SharpnessReport(
        largest_hessian_eigenvalue=float(lam),
        hessian_dim=x.size,
        fd_step=h.tolist(),
        params_at_min=x.tolist(),
        gradient_norm=float(np.linalg.norm(fd_gradient(loss_fn, x, h))),
        loss_at_min=float(loss_fn(x)),
        method=method,
        iterations=iters,
        hessian=H.tolist(),
    )


def refine_minimum(loss_fn: Callable, x0, fd_step, max_iter: int = 100, gtol: float = 1e-10) -> np.ndarray:
    """Damped Newton iterations in coordinates scaled by ``fd_step``.

    Used to move a point found by a coarse method onto the local minimum
    before measuring curvature.
    """
    h = _steps(fd_step, np.size(x0))
    x = np.asarray(x0, dtype=float).copy()
    f = loss_fn(x)
    mu = 1e-3
    for _ in range(max_iter):
        g = fd_gradient(loss_fn, x, h) * h
        if np.linalg.norm(g) < gtol:
            break
        H = fd_hessian(loss_fn, x, h) * np.outer(h, h)
        scale = np.maximum(np.abs(np.diag(H)), 1e-12)
        accepted = False
        for _ in range(30):
            step = np.linalg.solve(H + mu * np.diag(scale), -g)
            trial = x + step * h
            ft = loss_fn(trial)
            if ft < f:
                x, f, accepted = trial, ft, True
                mu = max(mu / 10, 1e-12)
                break
            mu *= 10
        if not accepted:
            break
    return x


@dataclass
class SharpnessComparison:
    original: SharpnessReport
    compressed: SharpnessReport

    @property
    def ratio(self) -> float:
        return self.compressed.largest_hessian_eigenvalue / self.original.largest_hessian_eigenvalue

    def to_dict(self) -> dict:
        return {"original": self.original.to_dict(), "compressed": self.compressed.to_dict(), "ratio": self.ratio}

    def to_json(self, path) -> None:
        _dump_json(self.to_dict(), path)


def worst_case_labels(N: int, seed: int = 0) -> np.ndarray:
    """A reproducible labeling of the ``N + 1`` worst-case points with both classes."""
    rng = np.random.default_rng(seed)
    while True:
        y = rng.integers(0, 2, N + 1)
        if 0 < y.sum() < y.size:
            return y


def worst_case_sharpness(N: int = 20, seed: int = 0, fd_step: float = 1e-4, restarts: int = 5,
                         train_iters: int = 2000) -> SharpnessComparison:
    """Curvature at trained minima of both schemes on the points ``2^k``.

    The compressed circuit (one gate, parameters ``omega, beta``) starts at
    the constructed frequency that reproduces the labels and is refined by
    damped Newton steps to the nearby minimum of the Fisher loss. Its
    frequency coordinate uses the step ``fd_step * 2^-N`` because the loss
    varies on that scale.

    The original circuit (one encoding gate with unit scale plus one
    trainable gate) is trained by Adam from several seeds and measured where
    Adam stops. Its Fisher loss is constant along a valley that ends at the
    parameters giving ``p0 = 1/2`` for every input, where the regularized
    ratio drops to exactly 1; Newton steps would slide into that artifact,
    so they are not applied, and restarts whose class means collapsed are
    discarded.
    """
    ds, omega = data.gen_worst_case(N, worst_case_labels(N, seed), "powers_of_two")
    X, y = ds.train

    comp_spec = CircuitSpec(Scheme.COMPRESSED, 1, 1)
    comp_loss = train.make_objective(train.FISHER, comp_spec, (X, y))
    comp_steps = np.array([fd_step * 2.0 ** -N, fd_step])
    comp_min = refine_minimum(comp_loss, np.array([omega, 0.0]), comp_steps)
    comp = sharpness(comp_loss, comp_spec, comp_min, comp_steps)
    comp.meta = {"scheme": "compressed", "N": N, "start_omega": omega,
                 "train_accuracy": _acc(comp_spec, comp_min, X, y), "mean_gap": _mean_gap(comp_spec, comp_min, X, y)}

    orig_spec = CircuitSpec(Scheme.ORIGINAL, 1, 1, encode_scale=1.0)
    orig_loss = train.make_objective(train.FISHER, orig_spec, (X, y))
    best = None
    for s in range(restarts):
        rep = train.train(orig_spec, ds, train.TrainConfig(seed=seed * 1000 + s, max_iters=train_iters))
        if _mean_gap(orig_spec, rep.final_params, X, y) ** 2 < COLLAPSE_GAP2:
            continue
        if best is None or rep.final_loss < best.final_loss:
            best = rep
    if best is None:
        raise NumericalFailureError("every original-scheme restart collapsed to a constant readout")
    orig_min = np.asarray(best.final_params)
    orig = sharpness(orig_loss, orig_spec, orig_min, fd_step)
    orig.meta = {"scheme": "original", "N": N, "encode_scale": 1.0, "train_accuracy": _acc(orig_spec, orig_min, X, y),
                 "mean_gap": _mean_gap(orig_spec, orig_min, X, y), "adam_iterations": best.iterations_run}
    return SharpnessComparison(orig, comp)


COLLAPSE_GAP2 = 1e-6


def _mean_gap(spec, params, X, y) -> float:
    p = model.readout(spec, params, X)
    return float(p[y == 1].mean() - p[y == 2].mean())


def _acc(spec, params, X, y) -> float:
    from . import classify

    p = model.readout(spec, params, X)
    lda = train._fit_or_fallback(p, y, "empirical")
    return classify.accuracy(classify.predict(lda, p), y)


# ---------------------------------------------------------------------------
# landscape


@dataclass
class LandscapeGrid:
    axes: np.ndarray  # (2, n_params), orthonormal rows
    origin: np.ndarray
    coords1: np.ndarray
    coords2: np.ndarray
    grid: np.ndarray  # grid[i, j] = loss at origin + coords1[i] axes[0] + coords2[j] axes[1]
    path: np.ndarray  # (T, 2)
    random_axes: bool = False

    @property
    def center_index(self) -> tuple[int, int]:
        return int(np.argmin(np.abs(self.coords1))), int(np.argmin(np.abs(self.coords2)))

    def nearest_cell(self, point) -> tuple[int, int]:
        return int(np.argmin(np.abs(self.coords1 - point[0]))), int(np.argmin(np.abs(self.coords2 - point[1])))

    def write_grid_csv(self, path) -> None:
        """First row holds the second-axis coordinates; each following row
        starts with its first-axis coordinate."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pc1\\pc2"] + [repr(float(v)) for v in self.coords2])
            for c, row in zip(self.coords1, self.grid):
                w.writerow([repr(float(c))] + [repr(float(v)) for v in row])

    def write_path_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "pc1", "pc2"])
            for i, (a, b) in enumerate(self.path):
                w.writerow([i, repr(float(a)), repr(float(b))])


def landscape_projection(report: train.TrainReport, loss_fn: Callable, grid_size: int = 51, seed: int = 0) -> LandscapeGrid:
    """Loss on the plane through the final parameters spanned by the two
    leading principal directions of the optimizer trajectory.

    The grid covers 1.2 times the trajectory's extent along each axis. If
    the trajectory does not span two directions, random orthonormal axes
    are used and ``random_axes`` is set.
    """
    traj = np.asarray(report.param_trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] < 3:
        raise InvalidArgumentError("landscape needs at least 3 trajectory points")
    if grid_size < 2:
        raise InvalidArgumentError("grid_size must be >= 2")
    final = np.asarray(report.final_params, dtype=float)
    centered = traj - traj.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    random_axes = vt.shape[0] < 2 or sv.size < 2 or sv[1] <= 1e-10 * max(sv[0], 1e-300)
    if random_axes:
        q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((final.size, 2)))
        axes = q.T
    else:
        axes = vt[:2]
    path = (traj - final) @ axes.T
    ext = 1.2 * np.max(np.abs(path), axis=0)
    ext[ext == 0] = 1.0
    c1 = np.linspace(-ext[0], ext[0], grid_size)
    c2 = np.linspace(-ext[1], ext[1], grid_size)
    if grid_size % 2:
        c1[grid_size // 2] = 0.0
        c2[grid_size // 2] = 0.0
    A, B = np.meshgrid(c1, c2, indexing="ij")
    P = final + A.reshape(-1, 1) * axes[0] + B.reshape(-1, 1) * axes[1]
    vals = np.asarray(loss_fn(P), dtype=float).reshape(grid_size, grid_size)
    return LandscapeGrid(axes, final, c1, c2, vals, path, bool(random_axes))


# ---------------------------------------------------------------------------
# Fourier spectrum


@dataclass
class FourierSpectrum:
    """One-sided DFT coefficients of ``p0(x)`` over one period.

    ``coefficients[k]`` is the complex amplitude of order ``k``; orders past
    ``len(coefficients) - 1`` are summarized by ``tail_power``.
    """

    coefficients: np.ndarray
    sample_count: int
    layer_count: int
    period: float
    mean_square: float
    tail_power: float = 0.0

    def power(self) -> float:
        c = np.abs(self.coefficients) ** 2
        n = self.sample_count
        weights = np.full(c.size, 2.0)
        weights[0] = 1.0
        if c.size - 1 == n // 2 and n % 2 == 0:
            weights[-1] = 1.0
        return float(np.sum(weights * c) + self.tail_power)

    def parseval_residual(self) -> float:
        return abs(self.power() - self.mean_square)

    def max_above(self, order: int) -> float:
        tail = np.abs(self.coefficients[order + 1:])
        worst = float(tail.max()) if tail.size else 0.0
        return max(worst, math.sqrt(self.tail_power / 2))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["order", "re", "im", "abs"])
            for k, c in enumerate(self.coefficients):
                w.writerow([k, repr(float(c.real)), repr(float(c.imag)), repr(float(abs(c)))])


def fourier_spectrum(spec: CircuitSpec, params, orders: int | None = None, samples: int = 1024,
                     period: float | None = None) -> FourierSpectrum:
    """DFT of the readout along one period of the input.

    The period is ``2 pi / encode_scale`` for the original scheme and
    ``2 pi`` for the compressed one (exact when its frequencies are integers).
    """
    if spec.n_features != 1:
        raise UnsupportedDimensionError("Fourier spectrum needs a single-feature circuit")
    if samples < 2:
        raise InvalidArgumentError("need at least 2 samples")
    if period is None:
        period = TWO_PI / spec.encode_scale if spec.scheme is Scheme.ORIGINAL else TWO_PI
    x = np.arange(samples) * (period / samples)
    p = model.readout(spec, params, x[:, None])
    coeffs = np.fft.rfft(p) / samples
    tail = 0.0
    if orders is not None:
        keep = coeffs[: orders + 1]
        full = FourierSpectrum(coeffs, samples, spec.n_layers, period, 0.0)
        tail = full.power() - FourierSpectrum(keep, samples, spec.n_layers, period, 0.0).power()
        coeffs = keep
    return FourierSpectrum(coeffs, samples, spec.n_layers, float(period), float(np.mean(p ** 2)), float(tail))
