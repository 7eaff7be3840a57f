"""Dense operator primitives: validation, metrics, and qubit helpers.

All states are plain complex ``numpy`` arrays.  The functions here are the
only place the package computes trace norms and fidelities, so conventions
(trace norm *without* the 1/2, fidelity as Tr sqrt(sqrt(a) b sqrt(a)))
are fixed once.
"""

from __future__ import annotations

import numpy as np

from .tolerances import EIG_CLIP, VALIDATION_TOL

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def validate_density(m, tol: float = VALIDATION_TOL) -> np.ndarray:
    """Check that ``m`` is a density matrix and return it as a complex array.

    Raises ``ValueError`` naming the violated invariant (shape, Hermiticity,
    trace, or positivity) together with the size of the violation.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {m.shape}")
    herm_dev = float(np.max(np.abs(m - m.conj().T)))
    if herm_dev > tol:
        raise ValueError(
            f"matrix is not Hermitian: max |m - m^dag| = {herm_dev:.3e} exceeds {tol:.1e}"
        )
    trace_dev = abs(complex(np.trace(m)) - 1.0)
    if trace_dev > tol:
        raise ValueError(
            f"trace differs from 1 by {trace_dev:.3e}, exceeds {tol:.1e}"
        )
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if w[0] < -tol:
        raise ValueError(
            f"negative eigenvalue {w[0]:.3e} below allowed floor -{tol:.1e}"
        )
    return m


def trace_norm_distance(a, b) -> float:
    """Tr |a - b| for Hermitian ``a``, ``b`` of equal shape.

    For qubit states this equals the Euclidean distance between Bloch
    vectors (so orthogonal pure states are at distance 2).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    d = 0.5 * (d + d.conj().T)  # inputs are Hermitian; kill rounding skew
    return float(np.sum(np.abs(np.linalg.eigvalsh(d))))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w[0] < -EIG_CLIP:
        raise ValueError(f"matrix is not PSD: eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a, b) -> float:
    """Uhlmann fidelity F(a, b) = Tr sqrt(sqrt(a) b sqrt(a)), in [0, 1].

    Eigenvalues in [-1e-10, 0] arising from rounding are clipped to zero;
    genuinely negative inputs raise.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ra = _psd_sqrt(a)
    inner = ra @ b @ ra
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    if w[0] < -EIG_CLIP:
        raise ValueError(f"inner matrix not PSD: eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(w))))


def bloch_to_density(r) -> np.ndarray:
    """Map a Bloch vector (r_x, r_y, r_z), |r| <= 1, to the qubit state."""
    rx, ry, rz = (float(c) for c in r)
    norm = np.sqrt(rx * rx + ry * ry + rz * rz)
    if norm > 1.0 + VALIDATION_TOL:
        raise ValueError(f"Bloch vector has norm {norm:.12f} > 1")
    return 0.5 * np.array(
        [[1.0 + rz, rx - 1j * ry], [rx + 1j * ry, 1.0 - rz]], dtype=complex
    )


def density_to_bloch(rho) -> np.ndarray:
    """Inverse of :func:`bloch_to_density` (round-trips to 1e-12)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got {rho.shape}")
    rx = 2.0 * rho[1, 0].real
    ry = 2.0 * rho[1, 0].imag
    rz = (rho[0, 0] - rho[1, 1]).real
    return np.array([rx, ry, rz])


def qubit_fidelity_sq(r, s) -> np.ndarray:
    """Squared fidelity between qubit states given as Bloch vectors.

    F^2 = (1 + r.s + sqrt((1-|r|^2)(1-|s|^2))) / 2.  Accepts stacked inputs
    with the vector components on the last axis.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    dot = np.sum(r * s, axis=-1)
    gr = 1.0 - np.sum(r * r, axis=-1)
    gs = 1.0 - np.sum(s * s, axis=-1)
    # |r| can exceed 1 by rounding after projections; clip the radicand.
    rad = np.clip(gr, 0.0, None) * np.clip(gs, 0.0, None)
    f2 = 0.5 * (1.0 + dot + np.sqrt(rad))
    return np.clip(f2, 0.0, 1.0)
