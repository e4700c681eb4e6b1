"""Two-mode gate algebra for a dual-rail photonic qubit.

States are complex arrays of shape ``(2,)`` holding the amplitudes of the
modes |0> and |1>. Gates are complex ``(2, 2)`` arrays. Global phases are
kept; every comparison in this package is made on probabilities or up to a
global phase.

The canonical Mach-Zehnder interferometer puts the external phase on the
first column (the input-mode-0 phase)::

    U(theta, phi) = 1/2 [[(-1 + e^{i theta}) e^{i phi},  i (1 + e^{i theta})],
                         [ i (1 + e^{i theta}) e^{i phi}, 1 - e^{i theta}    ]]

With the photon injected in mode |1> the first gate's external phase only
multiplies an amplitude that is zero, so it never affects a measurement.
:func:`mzi_row_phase` gives the alternative form with the external phase on
the first output row. Writing ``M`` for the common core, the column form is
``M diag(e^{i phi}, 1)`` and the row form ``diag(e^{i phi}, 1) M``: they give
the same probabilities for one gate acting on |1> but not for chained gates,
and with the row form the first gate's phase would no longer drop out. The
column form is used everywhere.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

ATOL = 1e-12

KET0 = np.array([1.0 + 0j, 0.0 + 0j])
KET1 = np.array([0.0 + 0j, 1.0 + 0j])
IDENTITY = np.eye(2, dtype=complex)


def _check_finite(**values):
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise InvalidArgumentError(f"{name} must be finite, got {value!r}")


def mzi_batch(theta, phi) -> np.ndarray:
    """Vectorised :func:`mzi` without validation.

    ``theta`` and ``phi`` broadcast against each other; the result has shape
    ``broadcast_shape + (2, 2)``.
    """
    e_t = np.exp(1j * np.asarray(theta, dtype=float))
    e_p = np.exp(1j * np.asarray(phi, dtype=float))
    e_t, e_p = np.broadcast_arrays(e_t, e_p)
    out = np.empty(e_t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5 * (e_t - 1.0) * e_p
    out[..., 0, 1] = 0.5j * (1.0 + e_t)
    out[..., 1, 0] = 0.5j * (1.0 + e_t) * e_p
    out[..., 1, 1] = 0.5 * (1.0 - e_t)
    return out


def mzi(theta: float, phi: float) -> np.ndarray:
    """Jones matrix of a Mach-Zehnder interferometer.

    Args:
        theta: internal phase in radians.
        phi: external phase in radians (applied to input mode 0).

    Returns:
        The 2x2 unitary. It is 2*pi periodic in both phases.
    """
    _check_finite(theta=theta, phi=phi)
    return mzi_batch(float(theta), float(phi))


def mzi_row_phase(theta: float, phi: float) -> np.ndarray:
    """MZI with the external phase on the first output row.

    ``i e^{i theta/2} [[e^{i phi} sin(theta/2), e^{i phi} cos(theta/2)],
    [cos(theta/2), -sin(theta/2)]]``. Equal to :func:`mzi` up to mode-local
    phases, so it yields the same probabilities for a single gate acting on
    |1>. Kept for comparison only.
    """
    _check_finite(theta=theta, phi=phi)
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    pre = 1j * np.exp(0.5j * theta)
    ep = np.exp(1j * phi)
    return pre * np.array([[ep * s, ep * c], [c, -s]], dtype=complex)


def dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(u, -1, -2))


def is_unitary(u: np.ndarray, atol: float = ATOL) -> bool:
    """True when ``U^dagger U = I`` entrywise within ``atol``."""
    u = np.asarray(u)
    return bool(np.allclose(dagger(u) @ u, IDENTITY, atol=atol, rtol=0.0))


def is_normalized(s: np.ndarray, atol: float = ATOL) -> bool:
    s = np.asarray(s)
    return abs(np.vdot(s, s).real - 1.0) <= atol


def apply(u: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evolve state ``s`` through gate ``u``."""
    u = np.asarray(u, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if u.shape != (2, 2) or s.shape != (2,):
        raise InvalidArgumentError(f"expected (2, 2) gate and (2,) state, got {u.shape} and {s.shape}")
    _check_finite(u=u, s=s)
    if not is_unitary(u, atol=1e-9):
        raise InvalidArgumentError("gate is not unitary")
    if not is_normalized(s, atol=1e-9):
        raise InvalidArgumentError("state is not normalized")
    return u @ s


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product ``a @ b``: apply ``b`` first, then ``a``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise InvalidArgumentError("compose expects two (2, 2) gates")
    return a @ b


def probabilities(s: np.ndarray) -> tuple[float, float]:
    """Projective Z measurement: ``(|amp0|^2, |amp1|^2)``."""
    s = np.asarray(s, dtype=complex)
    p0 = float(abs(s[0]) ** 2)
    p1 = float(abs(s[1]) ** 2)
    return p0, p1


def same_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = ATOL) -> bool:
    """Whether two states or gates differ only by a global phase."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    overlap = np.vdot(a, b)
    if abs(overlap) < atol:
        return bool(np.allclose(a, b, atol=atol))
    phase = overlap / abs(overlap)
    return bool(np.allclose(a * phase, b, atol=atol, rtol=0.0))
