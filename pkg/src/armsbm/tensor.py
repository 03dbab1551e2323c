"""Dense order-3 tensor algebra: matricizations, mode products, norms, SVD helpers.

Tensors are plain numpy arrays of shape (p1, p2, p3); matrices are 2-d arrays.
The matricization index map is the normative contract shared by all modules:
mode 1 unfolds to p1 x (p2*p3) with column index (i2-1)*p3 + i3 (1-based),
and modes 2 and 3 follow the cyclic convention
mode 2 -> p2 x (p3*p1), mode 3 -> p3 x (p1*p2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdResult",
    "matricize",
    "unmatricize",
    "mode_product",
    "svd",
    "frobenius_norm",
    "spectral_norm",
    "sigma_min",
    "sin_theta_distance",
]

_MODE_PERM = {1: (0, 1, 2), 2: (1, 2, 0), 3: (2, 0, 1)}
_ORTHO_TOL = 1e-8


def _check_mode(mode: int) -> None:
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be in {{1, 2, 3}}, got {mode}")


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Unfold an order-3 tensor along the given mode (cyclic convention)."""
    _check_mode(mode)
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got ndim={t.ndim}")
    perm = _MODE_PERM[mode]
    moved = np.transpose(t, perm)
    return moved.reshape(moved.shape[0], -1)


def unmatricize(m: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`matricize` for a tensor of shape ``dims``."""
    _check_mode(mode)
    m = np.asarray(m)
    perm = _MODE_PERM[mode]
    permuted_dims = tuple(dims[i] for i in perm)
    if m.shape != (permuted_dims[0], permuted_dims[1] * permuted_dims[2]):
        raise ValueError(f"matrix shape {m.shape} incompatible with dims {dims} in mode {mode}")
    inv_perm = tuple(np.argsort(perm))
    return np.transpose(m.reshape(permuted_dims), inv_perm)


def mode_product(t: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    """Marginal multiplication: replaces dimension ``mode`` of ``t`` by ``u.shape[0]``.

    Satisfies matricize(mode_product(t, u, s), s) == u @ matricize(t, s).
    """
    _check_mode(mode)
    t = np.asarray(t)
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[1] != t.shape[mode - 1]:
        raise ValueError(
            f"matrix of shape {u.shape} cannot multiply mode {mode} of tensor {t.shape}"
        )
    dims = list(t.shape)
    dims[mode - 1] = u.shape[0]
    return unmatricize(u @ matricize(t, mode), mode, tuple(dims))


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD with a deterministic sign convention on the left vectors."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def svd(a: np.ndarray) -> SvdResult:
    """Thin SVD of a matrix; largest-magnitude entry of each left vector is positive."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("svd input contains non-finite entries")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    v = vt.T
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return SvdResult(u=u * signs, s=s, v=v * signs)


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(t, dtype=float)))


def spectral_norm(t: np.ndarray) -> float:
    """Max over modes of the largest singular value of the matricization."""
    return max(
        float(np.linalg.svd(matricize(t, mode), compute_uv=False)[0]) for mode in (1, 2, 3)
    )


def sigma_min(t: np.ndarray) -> float:
    """Min over modes of the smallest non-zero singular value; 0 for the zero tensor."""
    t = np.asarray(t, dtype=float)
    if not np.any(t):
        return 0.0
    out = np.inf
    for mode in (1, 2, 3):
        s = np.linalg.svd(matricize(t, mode), compute_uv=False)
        tol = max(t.shape) * np.finfo(float).eps * s[0]
        nonzero = s[s > tol]
        if nonzero.size:
            out = min(out, float(nonzero[-1]))
    return out


def _check_orthonormal(u: np.ndarray, name: str) -> None:
    gram = u.T @ u
    if np.max(np.abs(gram - np.eye(u.shape[1]))) > _ORTHO_TOL:
        raise ValueError(f"{name} does not have orthonormal columns")


def sin_theta_distance(u1: np.ndarray, u2: np.ndarray) -> float:
    """Rotation-minimized spectral distance between two orthonormal bases.

    Equals min over orthogonal O of ||u1 - u2 O||, i.e. 2 sin(theta_max / 2)
    in terms of the largest principal angle.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != u2.shape:
        raise ValueError(f"shape mismatch: {u1.shape} vs {u2.shape}")
    _check_orthonormal(u1, "u1")
    _check_orthonormal(u2, "u2")
    # Work through the residual rather than the cosines: the singular values
    # of u2 - u1 (u1^T u2) are the principal-angle sines, which stay accurate
    # for nearly aligned subspaces where 1 - cos underflows.
    residual = u2 - u1 @ (u1.T @ u2)
    sines = np.clip(np.linalg.svd(residual, compute_uv=False), 0.0, 1.0)
    theta_max = float(np.arcsin(sines.max(initial=0.0)))
    return float(2.0 * np.sin(theta_max / 2.0))
