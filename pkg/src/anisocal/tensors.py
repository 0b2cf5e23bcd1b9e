"""Dense 3D tensor algebra: kinematics, spectral projectors, Voigt/Mandel maps.

Index conventions
-----------------
Second-order tensors are ``(3, 3)`` arrays, fourth-order tensors ``(3, 3, 3, 3)``
arrays with index order ``iJkL`` for two-point tangents. Voigt order is
``(11, 22, 33, 23, 13, 12)`` with raw components. Mandel scaling multiplies
shear slots by ``sqrt(2)`` so that the 6x6 matrix inverse equals the tensor
inverse on the symmetric subspace.

Functions prefixed with ``j`` operate on ``jax.numpy`` arrays and are safe to
trace; the rest take and return NumPy arrays and validate their inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .errors import AsymmetryTooLarge, NonInvertible

jax.config.update("jax_enable_x64", True)

DET_TOL = 1e-12
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
MANDEL_WEIGHTS = np.array([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])

_VOIGT_INDEX = np.empty((3, 3), dtype=int)
for _slot, (_i, _j) in enumerate(VOIGT_PAIRS):
    _VOIGT_INDEX[_i, _j] = _VOIGT_INDEX[_j, _i] = _slot

EYE = np.eye(3)


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in itertools.permutations(range(3)):
        eps[i, j, k] = np.linalg.det(EYE[[i, j, k]])
    return eps


EPS3 = levi_civita()


def jcofactor(a):
    """Cofactor ``det(A) A^-T`` as a quadratic polynomial (no inverse)."""
    return 0.5 * jnp.einsum("ijk,JKL,jK,kL->iJ", EPS3, EPS3, a, a)


def jdet(a):
    return jnp.einsum("ijk,i,j,k->", EPS3, a[:, 0], a[:, 1], a[:, 2])


@dataclass(frozen=True)
class Kinematics:
    F: np.ndarray
    C: np.ndarray
    J: float
    cofC: np.ndarray
    E: np.ndarray


def check_deformation(F) -> np.ndarray:
    F = np.asarray(F, dtype=float).reshape(3, 3)
    det = np.linalg.det(F)
    if not np.isfinite(det) or det <= DET_TOL:
        raise NonInvertible(f"det F = {det:.3e} is not positive")
    return F


def kinematics(F) -> Kinematics:
    """Right Cauchy-Green tensor, volume ratio, cofactor and Green-Lagrange strain."""
    F = check_deformation(F)
    C = F.T @ F
    cofC = np.asarray(jcofactor(jnp.asarray(C)))
    return Kinematics(F=F, C=C, J=float(np.linalg.det(F)), cofC=cofC, E=0.5 * (C - EYE))


@dataclass(frozen=True)
class Spectral:
    eigenvalues: np.ndarray  # distinct (merged) eigenvalues, ascending
    projectors: np.ndarray  # (n_G, 3, 3)
    multiplicities: tuple
    eigenvectors: np.ndarray  # raw eigenvectors (columns), ascending eigenvalues

    @property
    def count(self) -> int:
        return len(self.eigenvalues)


def spectral_sym3(S, merge_tol: float = 0.05) -> Spectral:
    """Eigen-projector decomposition with merging of near-equal eigenvalues.

    Eigenvalues closer than ``merge_tol * (max - min)`` are merged. If the
    whole spread is below ``merge_tol * max|eigenvalue|`` the tensor is treated
    as spherical (a single group); without this floor a relative-to-spread test
    could never merge all three eigenvalues.
    """
    S = np.asarray(S, dtype=float).reshape(3, 3)
    S = 0.5 * (S + S.T)
    lam, vec = np.linalg.eigh(S)
    spread = lam[-1] - lam[0]
    scale = np.max(np.abs(lam))
    groups: list[list[int]] = []
    if spread <= merge_tol * scale or spread == 0.0:
        groups = [[0, 1, 2]]
    else:
        groups = [[0]]
        for k in (1, 2):
            if lam[k] - lam[groups[-1][-1]] < merge_tol * spread:
                groups[-1].append(k)
            else:
                groups.append([k])
    values = np.array([lam[g].mean() for g in groups])
    projectors = np.array([vec[:, g] @ vec[:, g].T for g in groups])
    return Spectral(values, projectors, tuple(len(g) for g in groups), vec)


def _minor_sym(c: np.ndarray) -> np.ndarray:
    return 0.25 * (
        c + c.transpose(1, 0, 2, 3) + c.transpose(0, 1, 3, 2) + c.transpose(1, 0, 3, 2)
    )


def minor_asymmetry(c) -> float:
    c = np.asarray(c, dtype=float)
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(c - _minor_sym(c))) / scale)


def voigt_tangent(c, tol: float = 1e-6) -> np.ndarray:
    """Map a minor-symmetric 4th-order tensor to its raw 6x6 Voigt matrix."""
    c = np.asarray(c, dtype=float).reshape(3, 3, 3, 3)
    err = minor_asymmetry(c)
    if err > tol:
        raise AsymmetryTooLarge(f"minor symmetry violated: relative error {err:.2e}")
    cs = _minor_sym(c)
    out = np.empty((6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            out[a, b] = cs[i, j, k, l]
    return out


def tangent_from_voigt(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(6, 6)
    return v[_VOIGT_INDEX[:, :, None, None], _VOIGT_INDEX[None, None, :, :]]


def jvoigt_tangent(c):
    """Traceable Voigt map without validation; symmetrizes the minor pairs."""
    cs = 0.25 * (
        c + c.transpose(1, 0, 2, 3) + c.transpose(0, 1, 3, 2) + c.transpose(1, 0, 3, 2)
    )
    idx = np.array(VOIGT_PAIRS)
    return cs[idx[:, 0][:, None], idx[:, 1][:, None], idx[:, 0][None, :], idx[:, 1][None, :]]


def voigt_sym3(s) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(3, 3)
    s = 0.5 * (s + s.T)
    return np.array([s[i, j] for i, j in VOIGT_PAIRS])


def sym3_from_voigt(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(6)
    return v[_VOIGT_INDEX]


def mandel_matrix(c, tol: float = 1e-6) -> np.ndarray:
    return voigt_tangent(c, tol) * np.outer(MANDEL_WEIGHTS, MANDEL_WEIGHTS)


def tangent_from_mandel(m) -> np.ndarray:
    m = np.asarray(m, dtype=float).reshape(6, 6)
    return tangent_from_voigt(m / np.outer(MANDEL_WEIGHTS, MANDEL_WEIGHTS))


def mandel_vector(s) -> np.ndarray:
    return voigt_sym3(s) * MANDEL_WEIGHTS


def identity_sym4() -> np.ndarray:
    return 0.5 * (np.einsum("ik,jl->ijkl", EYE, EYE) + np.einsum("il,jk->ijkl", EYE, EYE))


def isotropic_tangent(lam: float, mu: float) -> np.ndarray:
    return lam * np.einsum("ij,kl->ijkl", EYE, EYE) + 2.0 * mu * identity_sym4()


# Fully symmetric tensors are stored by their independent components, one per
# multiset of indices (15 for order four, 28 for order six).
def _multisets(order: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations_with_replacement(range(3), order))


_MULTISETS = {4: _multisets(4), 6: _multisets(6)}


def _multiset_lookup(order: int) -> np.ndarray:
    pos = {m: n for n, m in enumerate(_MULTISETS[order])}
    table = np.empty((3,) * order, dtype=int)
    for idx in itertools.product(range(3), repeat=order):
        table[idx] = pos[tuple(sorted(idx))]
    return table


_LOOKUP = {4: _multiset_lookup(4), 6: _multiset_lookup(6)}


def pack_symmetric(t) -> np.ndarray:
    """Independent components of a fully symmetric 4th or 6th order tensor."""
    t = np.asarray(t, dtype=float)
    order = t.ndim
    if order not in _MULTISETS:
        raise ValueError(f"unsupported order {order}")
    return np.array([t[m] for m in _MULTISETS[order]])


def unpack_symmetric(values, order: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (len(_MULTISETS[order]),):
        raise ValueError(f"expected {len(_MULTISETS[order])} components for order {order}")
    return values[_LOOKUP[order]]


def rotation_about(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.einsum("ijk,j->ik", EPS3, axis)  # k @ v = axis x v
    return EYE + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)
