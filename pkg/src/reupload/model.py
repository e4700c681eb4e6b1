"""Data re-uploading circuits on one dual-rail qubit.

Two layouts are supported.

``Scheme.ORIGINAL`` alternates data-only encoding MZIs with trainable MZIs.
A feature vector of length ``n`` is uploaded by ``ceil(n/2)`` encoding gates
(features ``2j`` -> external phase, ``2j+1`` -> internal phase, both times
``encode_scale``; an unpaired last feature goes to the internal phase with a
zero external phase). Each encoding gate is followed by its own trainable
gate with phases ``(theta, phi)``, and the whole block is repeated for every
layer. Parameter layout: ``[theta_0, phi_0, theta_1, phi_1, ...]`` in gate
order.

``Scheme.COMPRESSED`` merges data and parameters in one gate,
``mzi(theta = omega_k * x_j + beta_k, phi = 0)``, with one gate per feature
per layer. Parameter layout: ``[omega_0, beta_0, omega_1, beta_1, ...]``.

The circuit always starts from |1> and reads out ``p0 = |<0|psi>|^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .errors import InvalidArgumentError

HALF_PI = math.pi / 2


class Scheme(str, enum.Enum):
    ORIGINAL = "original"
    COMPRESSED = "compressed"


@dataclass(frozen=True)
class CircuitSpec:
    scheme: Scheme
    n_features: int
    n_layers: int
    encode_scale: float = HALF_PI

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if int(self.n_features) != self.n_features or self.n_features < 1:
            raise InvalidArgumentError(f"n_features must be a positive integer, got {self.n_features}")
        if int(self.n_layers) != self.n_layers or self.n_layers < 1:
            raise InvalidArgumentError(f"n_layers must be a positive integer, got {self.n_layers}")
        if not (math.isfinite(self.encode_scale) and self.encode_scale > 0):
            raise InvalidArgumentError(f"encode_scale must be positive, got {self.encode_scale}")

    @property
    def slots_per_layer(self) -> int:
        """Trainable gates per layer."""
        if self.scheme is Scheme.ORIGINAL:
            return math.ceil(self.n_features / 2)
        return self.n_features

    @property
    def n_trainable_gates(self) -> int:
        return self.slots_per_layer * self.n_layers

    @property
    def n_params(self) -> int:
        return 2 * self.n_trainable_gates

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "n_features": self.n_features,
            "n_layers": self.n_layers,
            "encode_scale": self.encode_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitSpec":
        return cls(
            scheme=Scheme(d["scheme"]),
            n_features=int(d["n_features"]),
            n_layers=int(d["n_layers"]),
            encode_scale=float(d.get("encode_scale", HALF_PI)),
        )


def check_params(spec: CircuitSpec, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != (spec.n_params,):
        raise InvalidArgumentError(
            f"{spec.scheme.value} circuit with n={spec.n_features}, L={spec.n_layers} "
            f"needs {spec.n_params} parameters, got shape {params.shape}"
        )
    if not np.all(np.isfinite(params)):
        raise InvalidArgumentError("parameters must be finite")
    return params


def _check_features(spec: CircuitSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != spec.n_features:
        raise InvalidArgumentError(f"expected {spec.n_features} features, got array of shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("features must be finite")
    return X


def _encoding_phases(X: np.ndarray, scale: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """(theta, phi) arrays of every encoding gate for a batch ``X``."""
    n = X.shape[1]
    phases = []
    for j in range(n // 2):
        phases.append((X[:, 2 * j + 1] * scale, X[:, 2 * j] * scale))
    if n % 2:
        phases.append((X[:, n - 1] * scale, np.zeros(len(X))))
    return phases


def encoding_gates(x, scale: float = HALF_PI) -> list[np.ndarray]:
    """Encoding MZIs that upload one feature vector once.

    >>> len(encoding_gates(np.zeros(9)))
    5
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InvalidArgumentError("feature vector is empty")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("features must be finite")
    return [qcore.mzi(float(t[0]), float(p[0])) for t, p in _encoding_phases(x[None, :], scale)]


# ---------------------------------------------------------------------------
# batched gate sequences


@dataclass
class _Gate:
    matrix: np.ndarray  # (..., 2, 2) broadcastable against (S, N)
    slot: int | None = None  # trainable gate index, None for pure encoding
    feature: int | None = None  # compressed gates: feature index feeding theta


def _gate_sequence(spec: CircuitSpec, P: np.ndarray, X: np.ndarray) -> list[_Gate]:
    """Gates in application order for parameter sets ``P`` (S, n_params)
    and samples ``X`` (N, n). Matrices broadcast to ``(S, N, 2, 2)``."""
    gates: list[_Gate] = []
    if spec.scheme is Scheme.ORIGINAL:
        enc = [qcore.mzi_batch(t, p)[None] for t, p in _encoding_phases(X, spec.encode_scale)]
        k = 0
        for _ in range(spec.n_layers):
            for e in enc:
                gates.append(_Gate(e))
                train = qcore.mzi_batch(P[:, 2 * k], P[:, 2 * k + 1])[:, None]
                gates.append(_Gate(train, slot=k))
                k += 1
    else:
        k = 0
        for _ in range(spec.n_layers):
            for j in range(spec.n_features):
                theta = P[:, 2 * k, None] * X[None, :, j] + P[:, 2 * k + 1, None]
                gates.append(_Gate(qcore.mzi_batch(theta, 0.0), slot=k, feature=j))
                k += 1
    return gates


def _apply_batch(u: np.ndarray, s0: np.ndarray, s1: np.ndarray):
    return (
        u[..., 0, 0] * s0 + u[..., 0, 1] * s1,
        u[..., 1, 0] * s0 + u[..., 1, 1] * s1,
    )


def _evolve(gates: list[_Gate], shape) -> tuple[np.ndarray, np.ndarray]:
    s0 = np.zeros(shape, dtype=complex)
    s1 = np.ones(shape, dtype=complex)
    for g in gates:
        s0, s1 = _apply_batch(g.matrix, s0, s1)
    return s0, s1


def readout_many(spec: CircuitSpec, P, X) -> np.ndarray:
    """``p0`` for every parameter set in ``P`` (S, n_params) and sample in
    ``X`` (N, n); returns an ``(S, N)`` array."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != spec.n_params:
        raise InvalidArgumentError(f"expected {spec.n_params} parameters, got {P.shape[1]}")
    X = _check_features(spec, X)
    s0, _ = _evolve(_gate_sequence(spec, P, X), (P.shape[0], X.shape[0]))
    return np.abs(s0) ** 2


def readout(spec: CircuitSpec, params, X) -> np.ndarray:
    """``p0`` for every row of ``X`` under one parameter vector."""
    params = check_params(spec, params)
    return readout_many(spec, params[None, :], X)[0]


def forward_original(spec: CircuitSpec, params, x) -> tuple[float, np.ndarray]:
    """Run one sample through an original-scheme circuit.

    Returns:
        ``(p0, state)`` where ``state`` is the final amplitude vector.
    """
    if spec.scheme is not Scheme.ORIGINAL:
        raise InvalidArgumentError("forward_original needs an original-scheme spec")
    params = check_params(spec, params)
    X = _check_features(spec, np.asarray(x, dtype=float).ravel())
    s0, s1 = _evolve(_gate_sequence(spec, params[None, :], X), (1, 1))
    state = np.array([s0[0, 0], s1[0, 0]])
    return qcore.probabilities(state)[0], state


def forward_compressed(omega: float, x: float) -> float:
    """Single compressed gate ``mzi(omega * x, 0)`` acting on |1>."""
    if not (math.isfinite(omega) and math.isfinite(x)):
        raise InvalidArgumentError("omega and x must be finite")
    out = qcore.apply(qcore.mzi(omega * x, 0.0), qcore.KET1)
    return qcore.probabilities(out)[0]


def forward_compressed_multilayer(spec: CircuitSpec, params, x) -> float:
    if spec.scheme is not Scheme.COMPRESSED:
        raise InvalidArgumentError("forward_compressed_multilayer needs a compressed-scheme spec")
    return float(readout(spec, params, np.asarray(x, dtype=float).ravel())[0])


def effective_unitary(spec: CircuitSpec, params, x) -> np.ndarray:
    """Product of every gate of the circuit for one sample (last gate leftmost)."""
    params = check_params(spec, params)
    X = _check_features(spec, np.asarray(x, dtype=float).ravel())
    u = qcore.IDENTITY.copy()
    for g in _gate_sequence(spec, params[None, :], X):
        u = np.broadcast_to(g.matrix, (1, 1, 2, 2))[0, 0] @ u
    return u


# ---------------------------------------------------------------------------
# parameter-shift jacobian


def param_shift_jacobian(spec: CircuitSpec, params, X, shift: float = HALF_PI, perturb=None) -> tuple[np.ndarray, np.ndarray]:
    """Readouts and their exact derivatives by the two-term shift rule.

    Every trainable phase enters its gate through ``e^{i phase}`` only, so
    ``p0`` is a first-order trigonometric polynomial in it and
    ``d p0 / d phase = [p0(phase + pi/2) - p0(phase - pi/2)] / 2`` holds
    exactly. For compressed gates the rule is applied to the merged phase
    ``omega x + beta`` and chained: ``d/d omega = x d/d phase``.

    The shifted circuits are evaluated exactly; cached prefix states and
    suffix row vectors avoid re-simulating the unshifted gates. ``perturb``,
    if given, is applied to every evaluated readout array (shot noise).

    Returns:
        ``(p0, jac)`` with shapes ``(N,)`` and ``(N, n_params)``.
    """
    params = check_params(spec, params)
    X = _check_features(spec, X)
    n = X.shape[0]
    gates = _gate_sequence(spec, params[None, :], X)
    mats = [np.broadcast_to(g.matrix, (1, n, 2, 2))[0] for g in gates]

    # states entering each gate
    before = []
    s0 = np.zeros(n, dtype=complex)
    s1 = np.ones(n, dtype=complex)
    for m in mats:
        before.append((s0, s1))
        s0, s1 = _apply_batch(m, s0, s1)
    p0 = np.abs(s0) ** 2
    if perturb is None:
        perturb = _identity

    # <0| U_{G-1} ... U_{g+1} for each gate g
    after = [None] * len(mats)
    r0 = np.ones(n, dtype=complex)
    r1 = np.zeros(n, dtype=complex)
    for g in range(len(mats) - 1, -1, -1):
        after[g] = (r0, r1)
        m = mats[g]
        r0, r1 = r0 * m[:, 0, 0] + r1 * m[:, 1, 0], r0 * m[:, 0, 1] + r1 * m[:, 1, 1]

    def shifted(g, v):
        (a0, a1), (b0, b1) = after[g], before[g]
        w0, w1 = _apply_batch(v, b0, b1)
        return perturb(np.abs(a0 * w0 + a1 * w1) ** 2)

    jac = np.zeros((n, spec.n_params))
    for g, gate in enumerate(gates):
        k = gate.slot
        if k is None:
            continue
        if spec.scheme is Scheme.ORIGINAL:
            theta, phi = params[2 * k], params[2 * k + 1]
            for i, (dt, dp) in enumerate(((shift, 0.0), (0.0, shift))):
                plus = shifted(g, qcore.mzi_batch(theta + dt, phi + dp))
                minus = shifted(g, qcore.mzi_batch(theta - dt, phi - dp))
                jac[:, 2 * k + i] = 0.5 * (plus - minus) / math.sin(shift)
        else:
            x = X[:, gate.feature]
            phase = params[2 * k] * x + params[2 * k + 1]
            plus = shifted(g, qcore.mzi_batch(phase + shift, 0.0))
            minus = shifted(g, qcore.mzi_batch(phase - shift, 0.0))
            d_phase = 0.5 * (plus - minus) / math.sin(shift)
            jac[:, 2 * k] = x * d_phase
            jac[:, 2 * k + 1] = d_phase
    return perturb(p0), jac


def _identity(p):
    return p
