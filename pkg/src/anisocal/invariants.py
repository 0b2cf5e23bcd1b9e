"""Invariant sets with exact first and second derivatives.

Every invariant except ``I2`` and ``I3`` is a trace of a product of
second-order factors, each at most quadratic in ``C``:

* ``C`` itself,
* constant structure tensors (``G``, ``G^2``, ``G1 G2``),
* ``T : C`` for a fourth-order ``T`` (linear factor),
* ``C : Q : C`` style contractions (quadratic factor).

For a factor ``V(C)`` we carry ``D = dV/dC`` and, if quadratic, the constant
``K = d2V/dCdC``. The gradient and Hessian of ``tr(V_1 ... V_m)`` then follow
from the product rule with cyclic remainders. Derivatives are taken with
respect to the nine independent entries of a general ``C`` and chained to
``F`` through ``C = F^T F``:

    dI/dF_iJ       = (F g^T + F g)_iJ
    d2I/dF_iJ dF_kL = h~_JBLD F_iB F_kD + delta_ik (g_JL + g_LJ)

where ``h~`` is ``h`` summed over the transpositions of both index pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import NamedTuple, Optional

import jax
import jax.numpy as jnp
import numpy as np

from .errors import KindMismatch, UnsupportedGroup
from .structure import SetKind, StructureSpec, Symmetry, jrealize
from .tensors import EPS3, EYE, check_deformation, jcofactor, jdet

INVARIANT_NAMES = {
    SetKind.ISO: ["I1", "I2", "I3"],
    SetKind.G2: ["I1", "I2", "I3", "K4", "K5", "K6", "K7"],
    SetKind.G4: ["I1", "I2", "I3"] + [f"L{k}" for k in range(4, 12)],
    SetKind.G6: ["I1", "I2", "I3"] + [f"M{k}" for k in range(4, 14)],
    SetKind.PAIR: ["I1", "I2", "I3"] + [f"N{k}" for k in range(4, 13)],
}

_II = np.einsum("aI,bJ->abIJ", EYE, EYE)  # dC_ab/dC_IJ


class Factor(NamedTuple):
    v: jnp.ndarray
    d: Optional[jnp.ndarray]  # (3,3,3,3)
    k: Optional[jnp.ndarray]  # (3,3,3,3,3,3)


def _const(G) -> Factor:
    return Factor(G, None, None)


def _c(C) -> Factor:
    return Factor(C, _II, None)


def _linear(T, C) -> Factor:
    return Factor(jnp.einsum("abIJ,IJ->ab", T, C), T, None)


def _quadratic(Q, C) -> Factor:
    """Factor ``V_ab = Q_abIJKL C_IJ C_KL``."""
    k = Q + jnp.transpose(Q, (0, 1, 4, 5, 2, 3))
    v = jnp.einsum("abIJKL,IJ,KL->ab", Q, C, C)
    d = jnp.einsum("abIJKL,KL->abIJ", k, C)
    return Factor(v, d, k)


def _chain(mats, n=3):
    out = jnp.eye(n)
    for m in mats:
        out = out @ m
    return out


def _trace(factors: list[Factor], order: int):
    m = len(factors)
    vs = [f.v for f in factors]
    val = jnp.trace(_chain(vs))
    zero2 = jnp.zeros((3, 3))
    zero4 = jnp.zeros((3, 3, 3, 3))
    if order == 0:
        return val, zero2, zero4
    grad = zero2
    hess = zero4
    for k, fk in enumerate(factors):
        if fk.d is None:
            continue
        rest = _chain(vs[k + 1 :] + vs[:k])
        grad = grad + jnp.einsum("abIJ,ba->IJ", fk.d, rest)
        if order < 2:
            continue
        if fk.k is not None:
            hess = hess + jnp.einsum("abIJKL,ba->IJKL", fk.k, rest)
        for l, fl in enumerate(factors):
            if l == k or fl.d is None:
                continue
            # cyclic products strictly between k -> l and l -> k
            between = _chain([vs[(k + s) % m] for s in range(1, (l - k) % m)])
            after = _chain([vs[(l + s) % m] for s in range(1, (k - l) % m)])
            hess = hess + jnp.einsum("abIJ,bc,cdKL,da->IJKL", fk.d, between, fl.d, after)
    return val, grad, hess


def _principal(C, order: int):
    zero4 = jnp.zeros((3, 3, 3, 3))
    cof = jcofactor(C)
    i1 = jnp.trace(C)
    i2 = jnp.trace(cof)
    i3 = jdet(C)
    g1 = jnp.eye(3)
    g2 = i1 * jnp.eye(3) - C.T
    g3 = cof
    h1 = zero4
    h2 = jnp.asarray(np.einsum("AB,CD->ABCD", EYE, EYE) - np.einsum("AD,BC->ABCD", EYE, EYE))
    h3 = jnp.einsum("ACM,BDN,MN->ABCD", EPS3, EPS3, C) if order >= 2 else zero4
    return [(i1, g1, h1), (i2, g2, h2), (i3, g3, h3)]


def _mixed_terms(kind: SetKind, C, tensors) -> list[list[Factor]]:
    c = _c(C)
    if kind is SetKind.ISO:
        return []
    if kind is SetKind.G2:
        (G,) = tensors
        G, G2 = _const(G), _const(G @ G)
        return [[c, G], [c, c, G], [c, G2], [c, c, G2]]
    if kind is SetKind.PAIR:
        Ga, Gb = tensors
        terms = []
        for G in (Ga, Gb):
            g, g2 = _const(G), _const(G @ G)
            terms += [[c, g], [c, c, g], [c, g2], [c, c, g2]]
        return terms + [[c, _const(Ga @ Gb)]]
    if kind is SetKind.G4:
        (T,) = tensors
        h1 = _linear(T, C)
        h2 = _quadratic(jnp.einsum("abIL,JK->abIJKL", T, jnp.eye(3)), C)
        return [
            [h1],
            [h1, h1],
            [h1, h1, h1],
            [h2],
            [h1, c],
            [h2, c],
            [h1, h2],
            [h1, h1, c],
        ]
    (S,) = tensors
    T = jnp.einsum("kkabIJ->abIJ", S)
    h1 = _linear(T, C)
    h2 = _quadratic(jnp.transpose(S, (2, 3, 0, 1, 4, 5)), C)
    h3 = _quadratic(jnp.einsum("abIL,JK->abIJKL", T, jnp.eye(3)), C)
    # tr(C:G:C^2) equals tr(C . (1:G:C^2)) by full symmetry of G
    return [
        [h1],
        [h1, h1],
        [h1, h1, h1],
        [h2],
        [h3],
        [c, h3],
        [c, h1, h1],
        [c, h2],
        [h1, h2],
        [h1, h3],
    ]


def jinvariants_c(kind: SetKind, C, tensors, order: int = 2):
    """Invariant values and their C-derivatives: ``(n,), (n,3,3), (n,3,3,3,3)``."""
    rows = _principal(C, order)
    rows += [_trace(t, order) for t in _mixed_terms(SetKind(kind), C, tensors)]
    vals = jnp.stack([r[0] for r in rows])
    grads = jnp.stack([r[1] for r in rows])
    hess = jnp.stack([r[2] for r in rows])
    return vals, grads, hess


def jchain_grad(F, g):
    """Map C-gradients ``(..., 3, 3)`` to F-gradients."""
    return jnp.einsum("iB,...JB->...iJ", F, g) + jnp.einsum("iA,...AJ->...iJ", F, g)


def jchain_hess(F, g, h):
    hs = h + jnp.swapaxes(h, -4, -3)
    hs = hs + jnp.swapaxes(hs, -2, -1)
    first = jnp.einsum("...JBLD,iB,kD->...iJkL", hs, F, F)
    gs = g + jnp.swapaxes(g, -2, -1)
    return first + jnp.einsum("ik,...JL->...iJkL", jnp.eye(3), gs)


@dataclass(frozen=True)
class InvariantBundle:
    kind: SetKind
    values: np.ndarray
    dF: Optional[np.ndarray]
    ddF: Optional[np.ndarray]
    order: int

    @property
    def names(self) -> list[str]:
        return INVARIANT_NAMES[self.kind]


@partial(jax.jit, static_argnums=(0, 3))
def _bundle(kind, F, params, order):
    C = F.T @ F
    vals, g, h = jinvariants_c(kind, C, jrealize(kind, params), order)
    dF = jchain_grad(F, g)
    ddF = jchain_hess(F, g, h)
    return vals, dF, ddF


def invariant_bundle(kind: SetKind, F, spec: StructureSpec | None, order: int = 2) -> InvariantBundle:
    """Invariants of ``C = F^T F`` and their derivatives with respect to ``F``."""
    kind = SetKind(kind)
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if kind is SetKind.ISO:
        params = np.zeros(0) if spec is None else spec.params
        if spec is not None and spec.kind is not SetKind.ISO:
            raise KindMismatch(f"spec of kind {spec.kind.value} given for iso set")
    else:
        if spec is None or spec.kind is not kind:
            got = None if spec is None else spec.kind.value
            raise KindMismatch(f"set {kind.value} needs a {kind.value} structure spec, got {got}")
        spec.realize()  # validates degenerate parameters
        params = spec.params
    F = check_deformation(F)
    vals, dF, ddF = _bundle(kind, jnp.asarray(F), jnp.asarray(params), order)
    return InvariantBundle(
        kind,
        np.asarray(vals),
        np.asarray(dF) if order >= 1 else None,
        np.asarray(ddF) if order >= 2 else None,
        order,
    )


# ---------------------------------------------------------------------------
# Reference invariant sets for specific symmetry groups (values only).


def _principal_np(C) -> list[float]:
    C = np.asarray(C, dtype=float)
    cof = np.linalg.det(C) * np.linalg.inv(C).T
    return [np.trace(C), np.trace(cof), np.linalg.det(C)]


def _boehler_pair(C, A, B) -> list[float]:
    C2 = C @ C
    out = []
    for G in (A, B):
        out += [np.trace(C @ G), np.trace(C2 @ G), np.trace(C @ G @ G), np.trace(C2 @ G @ G)]
    return out + [np.trace(C @ A @ B)]


def _fourth(vectors) -> np.ndarray:
    return sum(np.einsum("i,j,k,l->ijkl", a, a, a, a) for a in vectors)


def _sixth(vectors) -> np.ndarray:
    return sum(np.einsum("i,j,k,l,m,n->ijklmn", a, a, a, a, a, a) for a in vectors)


def reference_invariants(group: Symmetry, C, data: dict, variant: str | None = None) -> np.ndarray:
    """Value-only invariant sets for a symmetry group, from explicit structure data.

    ``data`` keys by group:

    * Isotropic: none (``variant="J"`` gives the trace-of-powers set).
    * Triclinic / Monoclinic: ``A``, ``B`` (second-order tensors).
    * Orthotropic: ``a1``, ``a2`` (orthonormal vectors); ``variant="T"`` uses ``G``.
    * TransverselyIsotropic: ``G``.
    * Tetragonal: ``A1``, ``A2`` (orthonormal vectors).
    * Cubic: ``A1``, ``A2``, ``A3``.
    * Hexagonal: ``A1``, ``A2``, ``A3`` (unit, coplanar) and ``N`` (unit normal).

    Every set starts with ``(I1, I2, I3)``.
    """
    group = Symmetry(group)
    C = np.asarray(C, dtype=float)
    C2 = C @ C
    base = _principal_np(C)
    tr = np.trace
    if group is Symmetry.ISOTROPIC:
        if variant == "J":
            return np.array([tr(C), 0.5 * tr(C2), tr(C2 @ C) / 3.0])
        return np.array(base)
    if group in (Symmetry.TRICLINIC, Symmetry.MONOCLINIC):
        return np.array(base + _boehler_pair(C, data["A"], data["B"]))
    if group is Symmetry.ORTHOTROPIC:
        if variant == "T":
            G = data["G"]
            return np.array(base + [tr(G @ C), tr(G @ C2), tr(G @ G @ C), tr(G @ G @ C2)])
        G1 = np.outer(data["a1"], data["a1"])
        G2 = np.outer(data["a2"], data["a2"])
        return np.array(base + [tr(G1 @ C), tr(G1 @ C2), tr(G2 @ C), tr(G2 @ C2)])
    if group is Symmetry.TRANSVERSELY_ISOTROPIC:
        G = data["G"]
        return np.array(base + [tr(C @ G), tr(C2 @ G), tr(C @ G @ G), tr(C2 @ G @ G)])
    if group is Symmetry.TETRAGONAL:
        D = _fourth([data["A1"], data["A2"]])
        H1 = np.einsum("abIJ,IJ->ab", D, C)
        H2 = np.einsum("abIJ,IJ->ab", D, C2)
        p = np.linalg.matrix_power
        return np.array(
            base
            + [
                tr(H1), tr(p(H1, 2)), tr(p(H1, 3)),
                tr(H2), tr(p(H2, 2)), tr(p(H2, 3)),
                tr(C2 @ H1), tr(C2 @ H1 @ H1), tr(C @ H2 @ H2), tr(H1 @ H1 @ H2 @ H2),
            ]
        )  # fmt: skip
    if group is Symmetry.CUBIC:
        D = _fourth([data["A1"], data["A2"], data["A3"]])
        H1 = np.einsum("abIJ,IJ->ab", D, C)
        H2 = np.einsum("abIJ,IJ->ab", D, C2)
        p = np.linalg.matrix_power
        return np.array(
            base
            + [
                tr(p(H1, 2)), tr(p(H1, 3)), tr(p(H2, 2)), tr(p(H2, 3)),
                tr(C2 @ H1), tr(C2 @ H1 @ H1), tr(C @ H2 @ H2), tr(H1 @ H1 @ H2 @ H2),
            ]
        )  # fmt: skip
    if group is Symmetry.HEXAGONAL:
        S = _sixth([data["A1"], data["A2"], data["A3"]])
        M = np.outer(data["N"], data["N"])
        H1 = np.einsum("IJ,IJabKL,KL->ab", C, S, C)
        H2 = np.einsum("IJ,IJabKL,KL->ab", C2, S, C2)
        p = np.linalg.matrix_power
        return np.array(
            base
            + [
                tr(H1), tr(p(H1, 2)), tr(p(H1, 3)), tr(H2), tr(p(H2, 2)), tr(p(H2, 3)),
                tr(C @ M), tr(C2 @ M), tr(C @ H1), tr(C2 @ H1), tr(C @ H1 @ H1),
                tr(C2 @ H1 @ H1), tr(C @ H2), tr(C2 @ H2), tr(C @ H2 @ H2),
                tr(C2 @ H2 @ H2), tr(H1 @ H2), tr(H1 @ H1 @ H2), tr(H1 @ H2 @ H2),
                tr(H1 @ H1 @ H2 @ H2), tr(C @ H1 @ H2),
            ]
        )  # fmt: skip
    raise UnsupportedGroup(f"no reference invariant set for {group.value}")
