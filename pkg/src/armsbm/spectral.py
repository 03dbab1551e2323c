"""Spectral refinement of raw probability-tensor estimates.

Diagonal-deleted PCA extracts node and layer subspaces from Gram matrices of
tensor matricizations; projecting the raw estimates onto those subspaces
denoises them down to the low multilinear rank of the underlying model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import matricize, mode_product

__all__ = [
    "RefineConfig",
    "SubspaceSet",
    "hpca",
    "estimate_subspaces",
    "project_lowrank",
    "should_refresh",
]

HPCA_MAX_ITER = 100
HPCA_TOL = 1e-12


@dataclass(frozen=True)
class RefineConfig:
    """Target multilinear ranks: k for the node mode, (r1, r2) for the layer
    modes of the formation and dissolution tensors respectively."""

    k: int
    r1: int
    r2: int

    def __post_init__(self):
        if min(self.k, self.r1, self.r2) < 1:
            raise ValueError("ranks must be positive")


@dataclass(frozen=True)
class SubspaceSet:
    """Orthonormal bases: u_z (n, k) node subspace, u_w (L, r1) formation-layer
    subspace, u_m (L, r2) dissolution-layer subspace."""

    u_z: np.ndarray
    u_w: np.ndarray
    u_m: np.ndarray


def hpca(g: np.ndarray, r: int, max_iter: int = HPCA_MAX_ITER, tol: float = HPCA_TOL) -> np.ndarray:
    """Leading eigenspace of a Gram matrix with the diagonal imputed iteratively.

    The diagonal is deleted, then repeatedly refilled with the diagonal of the
    current best rank-r approximation until it stabilizes (or the iteration
    cap is hit). Returns the top-r left singular vectors.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    if not 1 <= r <= g.shape[0]:
        raise ValueError(f"rank {r} out of range for size {g.shape[0]}")
    if not np.allclose(g, g.T):
        raise ValueError("expected a symmetric Gram matrix")
    work = g.copy()
    np.fill_diagonal(work, 0.0)

    def top_pairs(a):
        # the target is a PSD Gram, so rank its eigenpairs algebraically;
        # diagonal deletion introduces spurious negative eigenvalues whose
        # magnitude can exceed weak signal directions
        vals, vecs = np.linalg.eigh(a)
        order = np.argsort(-vals, kind="stable")
        return vals[order[:r]], vecs[:, order[:r]]

    vals, vecs = top_pairs(work)
    for _ in range(max_iter):
        approx_diag = np.einsum("ij,j,ij->i", vecs, vals, vecs)
        change = np.max(np.abs(approx_diag - np.diagonal(work)))
        np.fill_diagonal(work, approx_diag)
        if change <= tol:
            break
        vals, vecs = top_pairs(work)
    # deterministic sign convention: largest-magnitude entry positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def estimate_subspaces(
    theta_hat: np.ndarray, delta_hat: np.ndarray, config: RefineConfig
) -> SubspaceSet:
    """Node and layer subspaces from the raw estimates' matricization Grams."""
    m1 = matricize(theta_hat + delta_hat, 1)
    u_z = hpca(m1 @ m1.T, config.k)
    m3_w = matricize(theta_hat, 3)
    u_w = hpca(m3_w @ m3_w.T, config.r1)
    m3_m = matricize(delta_hat, 3)
    u_m = hpca(m3_m @ m3_m.T, config.r2)
    return SubspaceSet(u_z=u_z, u_w=u_w, u_m=u_m)


def project_lowrank(t: np.ndarray, u_z: np.ndarray, u_layer: np.ndarray) -> np.ndarray:
    """Multilinear projection of an n x n x L tensor onto span(u_z) in both node
    modes and span(u_layer) in the layer mode.

    Computed via the thin factors (never materializing n x n projectors):
    first contract each mode down to the subspace coordinates, then expand back.
    """
    core = mode_product(
        mode_product(mode_product(t, u_z.T, 1), u_z.T, 2), u_layer.T, 3
    )
    return mode_product(
        mode_product(mode_product(core, u_z, 1), u_z, 2), u_layer, 3
    )


def should_refresh(t: int, power: int) -> bool:
    """Dyadic refresh schedule: recompute subspaces when t reaches 2**power."""
    return t >= 2**power
