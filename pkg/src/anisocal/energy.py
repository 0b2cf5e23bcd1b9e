"""Assembled potential, stresses, tangents and stress-measure transforms.

The model energy is written as a function of an input vector ``u`` (the
invariants, or the six coordinates of ``C`` plus ``det C`` for the coordinate
model)::

    psi(u) = psi_nn(u) - psi_nn(u0) - sum_a c_a (u_a - u0_a) - m (J - 1) + growth(J)

with ``u0`` the inputs at ``F = 1`` and ``J = sqrt(I3)``. The linear terms are
chosen so that the stress vanishes at ``F = 1`` for any structure tensor. All
derivatives are assembled in ``u``-space, mapped to ``C`` through the closed
form input derivatives and chained to ``F``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, partial

import jax
import jax.numpy as jnp
import numpy as np

from .invariants import jchain_grad, jchain_hess, jinvariants_c, _principal
from .network import COORD, ModelArtifact, jgate, jpnn, to_jax
from .structure import SetKind, jrealize
from .tensors import EYE, check_deformation

# Correction rules: corrected input index -> {input index: weight} applied to
# d psi_nn / d u at F = 1. The isotropic part is handled by the J term.
_CORRECTIONS = {
    SetKind.ISO: {},
    SetKind.G2: {3: {3: 1, 4: 2}, 5: {5: 1, 6: 2}},
    SetKind.G4: {3: {3: 1, 6: 2, 7: 2, 8: 3}, 4: {4: 1, 9: 1.5}, 5: {5: 1}, 10: {10: 1}},
    SetKind.G6: {3: {3: 1, 6: 2, 7: 2, 8: 3, 10: 3}, 4: {4: 1, 11: 1.5, 12: 1.5}, 5: {5: 1}, 9: {9: 1}},
    SetKind.PAIR: {3: {3: 1, 4: 2}, 5: {5: 1, 6: 2}, 7: {7: 1, 8: 2}, 9: {9: 1, 10: 2}, 11: {11: 1}},
}
_COEFF_NAMES = ("n", "o", "p", "q", "r")


def correction_matrix(kind: SetKind) -> np.ndarray:
    kind = SetKind(kind)
    n = kind.n_invariants
    mat = np.zeros((n, n))
    for target, weights in _CORRECTIONS[kind].items():
        for src, w in weights.items():
            mat[target, src] = w
    return mat


def growth(J, lam, power: int):
    return lam * (J + 1.0 / J - 2.0) ** power


def _growth_derivs(J, lam, power: int):
    s = J + 1.0 / J - 2.0
    ds = 1.0 - 1.0 / J**2
    dds = 2.0 / J**3
    f = lam * s**power
    f1 = lam * power * s ** (power - 1) * ds
    f2 = lam * power * ((power - 1) * s ** (power - 2) * ds**2 + s ** (power - 1) * dds)
    return f, f1, f2


def _consts(model: ModelArtifact) -> dict:
    return {
        "in_scale": jnp.asarray(model.norm.in_scale),
        "in_shift": jnp.asarray(model.norm.in_shift),
        "out_scale": jnp.asarray(model.norm.out_scale),
        "lambda_gr": jnp.asarray(model.lambda_gr),
        "gamma": jnp.asarray(model.gamma),
        "eps": jnp.asarray(model.eps),
    }


def trainables(model: ModelArtifact) -> dict:
    return {
        "pnn": to_jax(model.pnn),
        "q": jnp.asarray(model.q),
        "m": jnp.asarray(model.structure_params),
    }


def _psi_nn(tr, consts, u, order, gated=True):
    """Network energy with gradient and Hessian in input space."""
    scale = consts["in_scale"]
    if gated:
        scale = scale * jgate(tr["q"], consts["gamma"], consts["eps"])
        x = (u * consts["in_scale"] + consts["in_shift"]) * jgate(tr["q"], consts["gamma"], consts["eps"])
    else:
        x = u * consts["in_scale"] + consts["in_shift"]
    v, g, h = jpnn(tr["pnn"], x, order)
    s_out = consts["out_scale"]
    return s_out * v, s_out * g * scale, s_out * h * scale[:, None] * scale[None, :]


# coordinate model inputs: C11, C22, C33 and symmetrized C23, C13, C12
_COORD_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
_COORD_GRAD = np.zeros((6, 3, 3))
for _k, (_i, _j) in enumerate(_COORD_PAIRS):
    _COORD_GRAD[_k, _i, _j] += 0.5
    _COORD_GRAD[_k, _j, _i] += 0.5


def _coord_inputs(C, order):
    x = jnp.einsum("kIJ,IJ->k", _COORD_GRAD, C)
    (_, _, (i3, g3, h3)) = _principal(C, order)
    u = jnp.concatenate([x, i3[None]])
    g = jnp.concatenate([jnp.asarray(_COORD_GRAD), g3[None]])
    h = jnp.concatenate([jnp.zeros((6, 3, 3, 3, 3)), h3[None]])
    return u, g, h


def jcorrection_coeffs(kind: str, tr, consts):
    """Coefficient vector ``c`` and volumetric coefficient ``m`` at F = 1."""
    if kind == COORD:
        u0 = _coord_inputs(jnp.eye(3), 0)[0][:6]
        _, d0, _ = _psi_nn(tr, consts, u0, 1, gated=False)
        return d0, jnp.asarray(0.0)
    k = SetKind(kind)
    u0 = jinvariants_c(k, jnp.eye(3), jrealize(k, tr["m"]), 0)[0]
    _, d0, _ = _psi_nn(tr, consts, u0, 1)
    return jnp.asarray(correction_matrix(k)) @ d0, 2.0 * (d0[0] + 2.0 * d0[1] + d0[2])


def jresponse(kind: str, tr, consts, F, order: int = 2):
    """Energy, first Piola-Kirchhoff stress and two-point tangent at ``F``."""
    C = F.T @ F
    if kind == COORD:
        u, gu, hu = _coord_inputs(C, order)
        x0 = _coord_inputs(jnp.eye(3), 0)[0][:6]
        p0, d0, _ = _psi_nn(tr, consts, x0, 1, gated=False)
        p, d, hh = _psi_nn(tr, consts, u[:6], order, gated=False)
        psi = p - p0 - d0 @ (u[:6] - x0)
        dpsi = jnp.concatenate([d - d0, jnp.zeros(1)])
        hpsi = jnp.zeros((7, 7)).at[:6, :6].set(hh)
        i3_idx, power, m = 6, 2, 0.0
    else:
        k = SetKind(kind)
        tensors = jrealize(k, tr["m"])
        u, gu, hu = jinvariants_c(k, C, tensors, order)
        u0 = jinvariants_c(k, jnp.eye(3), tensors, 0)[0]
        p0, d0, _ = _psi_nn(tr, consts, u0, 1)
        c = jnp.asarray(correction_matrix(k)) @ d0
        m = 2.0 * (d0[0] + 2.0 * d0[1] + d0[2])
        p, d, hpsi = _psi_nn(tr, consts, u, order)
        psi = p - p0 - c @ (u - u0)
        dpsi = d - c
        i3_idx, power = 2, 3
    i3 = u[i3_idx]
    J = jnp.sqrt(i3)
    f, f1, f2 = _growth_derivs(J, consts["lambda_gr"], power)
    f = f - m * (J - 1.0)
    f1 = f1 - m
    dJ = 0.5 / J
    ddJ = -0.25 / (J * i3)
    # The energy vanishes at C = 1 by construction; the compiled difference
    # p - p0 can still leave a rounding residue there, so pin it.
    psi = jnp.where(jnp.all(C == jnp.eye(3)), 0.0, psi + f)
    dpsi = dpsi.at[i3_idx].add(f1 * dJ)
    hpsi = hpsi.at[i3_idx, i3_idx].add(f2 * dJ**2 + f1 * ddJ)
    P, A = jassemble(F, dpsi, hpsi, gu, hu, order)
    return psi, P, A


def jassemble(F, dpsi, hpsi, gu, hu, order: int = 2):
    """Stress and tangent from input-space derivatives of the energy."""
    gC = jnp.einsum("a,aIJ->IJ", dpsi, gu)
    P = jchain_grad(F, gC)
    if order < 2:
        return P, jnp.zeros((3, 3, 3, 3))
    hC = jnp.einsum("ab,aIJ,bKL->IJKL", hpsi, gu, gu) + jnp.einsum("a,aIJKL->IJKL", dpsi, hu)
    return P, jchain_hess(F, gC, hC)


def jtransform(F, P, A):
    """Cauchy stress, spatial tangent, 2nd Piola-Kirchhoff stress, material tangent."""
    J = jnp.linalg.det(F)
    Finv = jnp.linalg.inv(F)
    sigma = P @ F.T / J
    c = jnp.einsum("iJkL,jJ,lL->ijkl", A, F, F) / J - jnp.einsum("ik,jl->ijkl", jnp.eye(3), sigma)
    T = Finv @ P
    CC = jnp.einsum("iJkL,Ii,Kk->IJKL", A - jnp.einsum("ik,JL->iJkL", jnp.eye(3), T), Finv, Finv)
    return sigma, c, T, CC


@lru_cache(maxsize=None)
def response_fn(kind: str, order: int = 2, batched: bool = False):
    """Jitted ``(trainables, consts, F) -> (psi, P, A)``, optionally vmapped over F."""
    fn = partial(jresponse, kind, order=order)
    if batched:
        fn = jax.vmap(fn, in_axes=(None, None, 0))
    return jax.jit(fn)


@lru_cache(maxsize=None)
def _transform_fn(batched: bool):
    fn = jtransform
    if batched:
        fn = jax.vmap(fn)
    return jax.jit(fn)


@dataclass(frozen=True)
class MaterialResponse:
    psi: float
    P: np.ndarray
    A: np.ndarray | None = None
    sigma: np.ndarray | None = None
    c: np.ndarray | None = None
    T: np.ndarray | None = None
    CC: np.ndarray | None = None


@dataclass(frozen=True)
class CorrectionCoeffs:
    values: dict

    def __getitem__(self, name):
        return self.values[name]


def correction_coefficients(model: ModelArtifact) -> CorrectionCoeffs:
    """Named coefficients of the energy and stress normalization terms."""
    c, m = jcorrection_coeffs(model.kind, trainables(model), _consts(model))
    c = np.asarray(c)
    if model.is_coord:
        return CorrectionCoeffs({f"d{k}": float(v) for k, v in enumerate(c)})
    out = {"m": float(m)}
    for name, idx in zip(_COEFF_NAMES, _CORRECTIONS[SetKind(model.kind)]):
        out[name] = float(c[idx])
    return CorrectionCoeffs(out)


def transform_measures(F, P, A) -> dict:
    """Push-forward and pull-back of stress and tangent."""
    F = check_deformation(F)
    sigma, c, T, CC = _transform_fn(False)(jnp.asarray(F), jnp.asarray(P, dtype=float), jnp.asarray(A, dtype=float))
    return {"sigma": np.asarray(sigma), "c": np.asarray(c), "T": np.asarray(T), "CC": np.asarray(CC)}


def evaluate(model: ModelArtifact, F, order: int = 2, measures: bool = True) -> MaterialResponse:
    """Energy, stress and tangent of a model at one deformation gradient."""
    F = check_deformation(F)
    psi, P, A = response_fn(model.kind, order)(trainables(model), _consts(model), jnp.asarray(F))
    P = np.asarray(P)
    if order < 2:
        return MaterialResponse(float(psi), P)
    A = np.asarray(A)
    if not measures:
        return MaterialResponse(float(psi), P, A)
    t = transform_measures(F, P, A)
    return MaterialResponse(float(psi), P, A, t["sigma"], t["c"], t["T"], t["CC"])


def evaluate_coord(model: ModelArtifact, F, order: int = 2, measures: bool = True) -> MaterialResponse:
    if not model.is_coord:
        raise ValueError("evaluate_coord needs a coordinate-model artifact")
    return evaluate(model, F, order, measures)


def evaluate_batch(model: ModelArtifact, Fs, order: int = 2):
    """Vectorized evaluation; returns arrays ``psi (N,), sigma (N,3,3), c (N,3,3,3,3)``."""
    Fs = np.asarray(Fs, dtype=float).reshape(-1, 3, 3)
    for F in Fs:
        check_deformation(F)
    psi, P, A = response_fn(model.kind, order, True)(trainables(model), _consts(model), jnp.asarray(Fs))
    sigma, c, _, _ = _transform_fn(True)(jnp.asarray(Fs), P, A)
    return np.asarray(psi), np.asarray(P), np.asarray(sigma), np.asarray(c)


def stiffness_scale(model: ModelArtifact) -> float:
    """Largest tangent entry at F = 1, used to scale normalization checks."""
    A = evaluate(model, EYE, 2, measures=False).A
    return float(np.max(np.abs(A)))
