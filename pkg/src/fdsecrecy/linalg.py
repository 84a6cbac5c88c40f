"""Dense complex linear-algebra helpers shared by the solvers.

Matrices are plain numpy arrays. Row vectors are 2-D arrays of shape
``(1, m)``; Hermitian matrices are square complex arrays. Most helpers also
accept a leading batch axis.
"""
import logging
import warnings

import numpy as np

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
SYMMETRIZE_WARN = 1e-9
PSD_CLAMP = 1e-10
DEFAULT_REL_TOL = 1e-6
RANK_FLOOR = 1e-12


class LinAlgError(ValueError):
    """Raised for dimension mismatches and failed decompositions."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def as_row(v):
    """Return ``v`` as a complex ``(1, m)`` row vector."""
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim != 2 or v.shape[0] != 1:
        raise LinAlgError(f"expected a row vector, got shape {v.shape}")
    return v


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        return False
    return bool(np.all(np.abs(m - np.conj(np.swapaxes(m, -1, -2))) <= tol))


def hermitize(m, name="matrix"):
    """Symmetrize ``m`` to ``(m + m^H)/2``.

    Config files carry rounded entries, so small asymmetries are repaired
    silently and larger ones (above ``SYMMETRIZE_WARN``) with a warning.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise LinAlgError(f"{name} must be square, got shape {m.shape}")
    h = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    err = float(np.max(np.abs(h - m))) if m.size else 0.0
    if err > SYMMETRIZE_WARN:
        warnings.warn(f"{name}: Hermitian correction of {err:.3g} applied",
                      stacklevel=2)
    return h


def quadratic_form(v, m, psd=False):
    """Real value of ``v M v^H`` for a row vector ``v``.

    With ``psd=True`` tiny negative round-off (down to ``-1e-10``) is
    clamped to zero.
    """
    v = as_row(v)
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != v.shape[1]:
        raise LinAlgError(
            f"dimension mismatch: vector {v.shape} vs matrix {m.shape}")
    val = float(np.real((v @ m @ v.conj().T)[0, 0]))
    if psd and -PSD_CLAMP <= val < 0.0:
        val = 0.0
    return val


def outer(v):
    """Rank-one Hermitian matrix ``v^H v`` for a row vector ``v``."""
    v = as_row(v)
    return v.conj().T @ v


def hermitian_eigen(m, max_residual=1e-9):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The result is checked: ``||M V - V diag(w)||_F`` must not exceed
    ``max_residual * max(1, ||M||_F)``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise LinAlgError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise LinAlgError(f"eigendecomposition failed: {exc}") from exc
    res = float(np.linalg.norm(m @ v - v * w))
    scale = max(1.0, float(np.linalg.norm(m)))
    if not np.isfinite(res) or res > max_residual * scale:
        raise LinAlgError(
            f"eigendecomposition residual {res:.3g} exceeds tolerance",
            residual=res)
    return w, v


def min_eigenvalue(m):
    """Smallest eigenvalue of a Hermitian matrix (or a stack of them)."""
    m = np.asarray(m)
    if m.shape[-1] == 0:
        return np.full(m.shape[:-2], np.inf)
    return np.linalg.eigvalsh(m)[..., 0]


def is_psd(m, tol=1e-8):
    return bool(np.all(min_eigenvalue(m) >= -tol))


def numerical_rank(m, rel_tol=DEFAULT_REL_TOL, floor_scale=RANK_FLOOR):
    """Count eigenvalues above ``rel_tol * max(trace(M), floor_scale)``."""
    w, _ = hermitian_eigen(m)
    scale = max(float(np.real(np.trace(m))), floor_scale)
    return int(np.sum(w > rel_tol * scale))


def psd_part(m):
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues zeroed)."""
    m = hermitize(np.asarray(m, dtype=complex))
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def real_embed(m):
    """Real symmetric embedding ``[[Re M, -Im M], [Im M, Re M]]``.

    Works on a single matrix or a stack ``(..., k, k)``. The spectrum of the
    embedding is the spectrum of ``M`` with every multiplicity doubled.
    """
    m = np.asarray(m, dtype=complex)
    re, im = m.real, m.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def real_unembed(a):
    """Inverse of :func:`real_embed` (projects onto the embedding structure)."""
    a = np.asarray(a, dtype=float)
    k = a.shape[-1] // 2
    p = 0.5 * (a[..., :k, :k] + a[..., k:, k:])
    q = 0.5 * (a[..., k:, :k] - a[..., :k, k:])
    return p + 1j * q
