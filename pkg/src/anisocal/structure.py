"""Parameterized structure tensors and symmetry classification.

Parameter vectors
-----------------
* ``G2``: ``(g1, g2, g3, phi1, phi2, phi3)``: eigenvalue weights and the three
  angles of the rotation whose columns are the eigenvectors.
* ``G4`` / ``G6``: three blocks ``(a, theta, phi)``, one per direction vector
  ``A = a * (sin theta cos phi, sin theta sin phi, cos theta)``.
* ``PAIR``: two ``G2`` blocks.

Builders prefixed with ``j`` are traceable (used inside training); the public
``build_*`` functions validate and return NumPy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import jax.numpy as jnp
import numpy as np

from .errors import DegenerateVectors, DegenerateWeights, KindMismatch
from .tensors import EPS3, spectral_sym3

WEIGHT_FLOOR = 1e-8
NORM_FLOOR = 1e-12


class SetKind(str, Enum):
    ISO = "iso"
    G2 = "g2"
    G4 = "g4"
    G6 = "g6"
    PAIR = "pair"

    @property
    def n_invariants(self) -> int:
        return {"iso": 3, "g2": 7, "g4": 11, "g6": 13, "pair": 12}[self.value]

    @property
    def n_params(self) -> int:
        return {"iso": 0, "g2": 6, "g4": 9, "g6": 9, "pair": 12}[self.value]


_G2_LO = np.array([0.0, 0.0, 0.0, 0.0, -np.pi / 2, -np.pi])
_G2_HI = np.array([1.0, 1.0, 1.0, np.pi, np.pi / 2, np.pi])
_VEC_LO = np.tile([0.0, 0.0, 0.0], 3)
_VEC_HI = np.tile([1.0, np.pi, 2 * np.pi], 3)


def param_bounds(kind: SetKind) -> tuple[np.ndarray, np.ndarray]:
    kind = SetKind(kind)
    if kind is SetKind.ISO:
        return np.zeros(0), np.zeros(0)
    if kind is SetKind.G2:
        return _G2_LO.copy(), _G2_HI.copy()
    if kind is SetKind.PAIR:
        return np.tile(_G2_LO, 2), np.tile(_G2_HI, 2)
    return _VEC_LO.copy(), _VEC_HI.copy()


def random_params(kind: SetKind, rng: np.random.Generator) -> np.ndarray:
    lo, hi = param_bounds(kind)
    return rng.uniform(lo, hi)


def jrotation(phi1, phi2, phi3):
    c1, c2, c3 = jnp.cos(phi1), jnp.cos(phi2), jnp.cos(phi3)
    s1, s2, s3 = jnp.sin(phi1), jnp.sin(phi2), jnp.sin(phi3)
    return jnp.array(
        [
            [c1 * c2, c1 * s2 * s3 - c3 * s1, s1 * s3 + c1 * c3 * s2],
            [c2 * s1, c1 * c3 + s1 * s2 * s3, c3 * s1 * s2 - c1 * s3],
            [-s2, c2 * s3, c2 * c3],
        ]
    )


def jg2(p):
    q = jrotation(p[3], p[4], p[5])
    g = p[:3]
    return (q * g) @ q.T / jnp.maximum(jnp.sum(g), WEIGHT_FLOOR)


def jvectors(p):
    """Direction vectors ``A_alpha`` as rows of a (3, 3) array."""
    p = jnp.reshape(p, (3, 3))
    a, th, ph = p[:, 0], p[:, 1], p[:, 2]
    n = jnp.stack([jnp.sin(th) * jnp.cos(ph), jnp.sin(th) * jnp.sin(ph), jnp.cos(th)], axis=1)
    return a[:, None] * n


def jg4(p):
    A = jvectors(p)
    s = jnp.einsum("ai,aj,ak,al->ijkl", A, A, A, A)
    n = jnp.sum(jnp.sum(A * A, axis=1) ** 2)
    return s / jnp.maximum(n, NORM_FLOOR)


def jg6(p):
    A = jvectors(p)
    s = jnp.einsum("ai,aj,ak,al,am,an->ijklmn", A, A, A, A, A, A)
    n = jnp.sum(jnp.sum(A * A, axis=1) ** 3)
    return s / jnp.maximum(n, NORM_FLOOR)


def jrealize(kind: SetKind, p) -> tuple:
    """Realized structure tensors for a parameter vector (traceable)."""
    kind = SetKind(kind)
    if kind is SetKind.ISO:
        return ()
    if kind is SetKind.G2:
        return (jg2(p),)
    if kind is SetKind.G4:
        return (jg4(p),)
    if kind is SetKind.G6:
        return (jg6(p),)
    return (jg2(p[:6]), jg2(p[6:]))


def _check_len(kind: SetKind, p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.shape != (kind.n_params,):
        raise KindMismatch(f"{kind.value} expects {kind.n_params} parameters, got {p.size}")
    return p


def build_g2(p) -> np.ndarray:
    p = _check_len(SetKind.G2, p)
    if p[:3].sum() < WEIGHT_FLOOR:
        raise DegenerateWeights(f"eigenvalue weights sum to {p[:3].sum():.2e}")
    return np.asarray(jg2(jnp.asarray(p)))


def _check_vectors(p) -> None:
    if np.max(np.abs(p.reshape(3, 3)[:, 0])) < WEIGHT_FLOOR:
        raise DegenerateVectors("all direction-vector lengths vanish")


def build_g4(p) -> np.ndarray:
    p = _check_len(SetKind.G4, p)
    _check_vectors(p)
    return np.asarray(jg4(jnp.asarray(p)))


def build_g6(p) -> np.ndarray:
    p = _check_len(SetKind.G6, p)
    _check_vectors(p)
    return np.asarray(jg6(jnp.asarray(p)))


def direction_vectors(p) -> np.ndarray:
    return np.asarray(jvectors(jnp.asarray(np.asarray(p, dtype=float))))


@dataclass(frozen=True)
class StructureSpec:
    kind: SetKind
    params: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", SetKind(self.kind))
        object.__setattr__(self, "params", _check_len(self.kind, self.params))

    def realize(self) -> tuple[np.ndarray, ...]:
        if self.kind is SetKind.G2:
            return (build_g2(self.params),)
        if self.kind is SetKind.G4:
            return (build_g4(self.params),)
        if self.kind is SetKind.G6:
            return (build_g6(self.params),)
        if self.kind is SetKind.PAIR:
            return (build_g2(self.params[:6]), build_g2(self.params[6:]))
        return ()


class Symmetry(str, Enum):
    ISOTROPIC = "Isotropic"
    TRANSVERSELY_ISOTROPIC = "TransverselyIsotropic"
    ORTHOTROPIC = "Orthotropic"
    TETRAGONAL = "Tetragonal"
    CUBIC = "Cubic"
    HEXAGONAL = "Hexagonal"
    MONOCLINIC = "Monoclinic"
    TRICLINIC = "Triclinic"
    INDETERMINATE = "Indeterminate"


@dataclass
class SymmetryLabel:
    group: Symmetry
    diagnostics: dict = field(default_factory=dict)
    axis: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {"group": self.group.value, "diagnostics": dict(self.diagnostics)}
        if self.axis is not None:
            out["axis"] = [float(x) for x in self.axis]
        return out


def _label_g2(G, tol: float) -> SymmetryLabel:
    sp = spectral_sym3(G, tol)
    lam = np.linalg.eigvalsh(G)
    diag = {"n_G": sp.count, "eigenvalues": [float(x) for x in lam]}
    if sp.count == 1:
        return SymmetryLabel(Symmetry.ISOTROPIC, diag)
    if sp.count == 2:
        single = sp.multiplicities.index(1)
        axis = np.linalg.eigh(sp.projectors[single])[1][:, -1]
        return SymmetryLabel(Symmetry.TRANSVERSELY_ISOTROPIC, diag, axis)
    return SymmetryLabel(Symmetry.ORTHOTROPIC, diag)


def _in_span(base, other, tol: float) -> bool:
    """Whether ``other`` is (nearly) a combination of the identity and ``base``."""
    basis = np.stack([np.eye(3).ravel(), base.ravel()], axis=1)
    coef, *_ = np.linalg.lstsq(basis, other.ravel(), rcond=None)
    resid = np.linalg.norm(basis @ coef - other.ravel())
    return resid <= tol * max(np.linalg.norm(other), 1e-300)


def pair_diagnostics(G1, G2) -> dict:
    w = np.einsum("lmn,mp,pn->l", EPS3, G1, G2)
    v1 = np.cross(G1 @ w, w)
    v2 = np.cross(G2 @ w, w)
    nw = float(np.linalg.norm(w))

    def sine(G, v):
        # sin of the angle between G w and w; 0 when w is an eigenvector of G
        return float(np.linalg.norm(v) / max(np.linalg.norm(G @ w) * nw, 1e-300))

    return {
        "w": w,
        "norm_w": nw,
        "norm_v1": float(np.linalg.norm(v1)),
        "norm_v2": float(np.linalg.norm(v2)),
        "sin1": sine(G1, v1),
        "sin2": sine(G2, v2),
    }


def _label_pair(G1, G2, tol: float, pair_tol: float) -> SymmetryLabel:
    s1, s2 = spectral_sym3(G1, tol), spectral_sym3(G2, tol)
    d = pair_diagnostics(G1, G2)
    diag = {
        "n_G1": s1.count,
        "n_G2": s2.count,
        "norm_w": d["norm_w"],
        "norm_v1": d["norm_v1"],
        "norm_v2": d["norm_v2"],
        "sin1": d["sin1"],
        "sin2": d["sin2"],
    }
    if s1.count == 1 and s2.count == 1:
        return SymmetryLabel(Symmetry.ISOTROPIC, diag)
    for base, sb, other in ((G1, s1, G2), (G2, s2, G1)):
        if sb.count == 2 and _in_span(base, other, tol):
            return SymmetryLabel(Symmetry.TRANSVERSELY_ISOTROPIC, diag, _label_g2(base, tol).axis)
    norm_w = d["norm_w"]
    if norm_w <= pair_tol * np.linalg.norm(G1) * np.linalg.norm(G2):
        return SymmetryLabel(Symmetry.ORTHOTROPIC, diag)
    if d["sin1"] < pair_tol and d["sin2"] < pair_tol:
        return SymmetryLabel(Symmetry.MONOCLINIC, diag, d["w"] / norm_w)
    return SymmetryLabel(Symmetry.TRICLINIC, diag)


def _vector_geometry(A, tol: float) -> dict:
    lengths = np.linalg.norm(A, axis=1)
    lmax = lengths.max()
    active = lengths > tol * lmax
    cosines = {}
    for a in range(3):
        for b in range(a + 1, 3):
            if active[a] and active[b]:
                cosines[(a, b)] = float(A[a] @ A[b] / (lengths[a] * lengths[b]))
    return {"lengths": lengths, "active": active, "cosines": cosines, "lmax": lmax}


def _label_g4(A, tol: float) -> SymmetryLabel:
    geo = _vector_geometry(A, tol)
    L, lmax = geo["lengths"], geo["lmax"]
    diag = {
        "lengths": [float(x) for x in L],
        "max_abs_cos": max([abs(c) for c in geo["cosines"].values()], default=0.0),
    }
    orthogonal = diag["max_abs_cos"] < tol
    if not orthogonal:
        return SymmetryLabel(Symmetry.INDETERMINATE, diag)
    equal = [abs(L[a] - L[b]) < tol * lmax for a, b in ((0, 1), (0, 2), (1, 2))]
    if all(equal):
        return SymmetryLabel(Symmetry.CUBIC, diag)
    if sum(equal) == 1:
        a, b = ((0, 1), (0, 2), (1, 2))[equal.index(True)]
        odd = ({0, 1, 2} - {a, b}).pop()
        axis = A[odd] / L[odd] if geo["active"][odd] else np.cross(A[a], A[b])
        return SymmetryLabel(Symmetry.TETRAGONAL, diag, axis / np.linalg.norm(axis))
    return SymmetryLabel(Symmetry.INDETERMINATE, diag)


def _label_g6(A, tol: float) -> SymmetryLabel:
    L = np.linalg.norm(A, axis=1)
    lmax = L.max()
    diag = {"lengths": [float(x) for x in L]}
    if L.min() < tol * lmax:
        return SymmetryLabel(Symmetry.INDETERMINATE, diag)
    N = A / L[:, None]
    dots = [abs(N[a] @ N[b]) for a, b in ((0, 1), (0, 2), (1, 2))]
    coplanar = abs(np.linalg.det(N))
    diag.update({"abs_cosines": [float(x) for x in dots], "coplanarity": float(coplanar)})
    equal = np.ptp(L) < tol * lmax
    sixty = all(abs(x - 0.5) < tol for x in dots)
    if equal and sixty and coplanar < tol:
        axis = np.cross(N[0], N[1])
        return SymmetryLabel(Symmetry.HEXAGONAL, diag, axis / np.linalg.norm(axis))
    return SymmetryLabel(Symmetry.INDETERMINATE, diag)


def classify(spec: StructureSpec, tol: float = 0.05, pair_tol: float = 0.02) -> SymmetryLabel:
    """Assign a symmetry group to realized structure tensors.

    ``tol`` is relative to eigenvalue spreads and vector lengths; ``pair_tol``
    is the ratio used for the commutator and shared-eigenvector tests of a
    pair of second-order tensors.
    """
    kind = spec.kind
    if kind is SetKind.ISO:
        return SymmetryLabel(Symmetry.ISOTROPIC)
    if kind is SetKind.G2:
        return _label_g2(spec.realize()[0], tol)
    if kind is SetKind.PAIR:
        G1, G2 = spec.realize()
        return _label_pair(G1, G2, tol, pair_tol)
    A = direction_vectors(spec.params)
    if kind is SetKind.G4:
        return _label_g4(A, tol)
    return _label_g6(A, tol)


def classify_g2_tensor(G, tol: float = 0.05) -> SymmetryLabel:
    return _label_g2(np.asarray(G, dtype=float), tol)


def classify_pair_tensors(G1, G2, tol: float = 0.05, pair_tol: float = 0.02) -> SymmetryLabel:
    return _label_pair(np.asarray(G1, dtype=float), np.asarray(G2, dtype=float), tol, pair_tol)
