"""Residuals of closed-form identities between invariant sets.

Each function draws ``n`` random right Cauchy-Green tensors (and random
structure orientations) and returns the largest relative residual.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from anisocal.invariants import reference_invariants
from anisocal.structure import Symmetry

from conftest import random_C


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _frame(rng):
    return Rotation.random(random_state=rng).as_matrix()


def cayley_hamilton(n, rng):
    worst = 0.0
    for _ in range(n):
        C = random_C(rng)
        I1, I2, I3 = reference_invariants(Symmetry.ISOTROPIC, C, {})
        J1, J2, J3 = reference_invariants(Symmetry.ISOTROPIC, C, {}, variant="J")
        ch = C @ C @ C - I1 * C @ C + I2 * C - I3 * np.eye(3)
        worst = max(
            worst,
            _rel(J1, I1),
            _rel(J2, 0.5 * I1**2 - I2),
            _rel(J3, I1**3 / 3.0 - I1 * I2 + I3),
            np.abs(ch).max() / max(1.0, np.abs(C @ C @ C).max()),
        )
    return worst


def orthotropy_equivalence(n, rng):
    """Single-tensor set reproduces the two-vector set (with corrected denominators)."""
    worst = 0.0
    for _ in range(n):
        C = random_C(rng)
        Q = _frame(rng)
        lam = np.sort(rng.uniform(0.05, 1.0, 3))
        l1, l2, l3 = lam
        G = Q @ np.diag(lam) @ Q.T
        S = reference_invariants(Symmetry.ORTHOTROPIC, C, {"a1": Q[:, 0], "a2": Q[:, 1]})
        T = reference_invariants(Symmetry.ORTHOTROPIC, C, {"G": G}, variant="T")
        I1, I2 = T[0], T[1]
        tr2 = I1**2 - 2 * I2
        d1 = (l1 - l2) * (l1 - l3)
        d2 = (l2 - l1) * (l2 - l3)
        pred = [
            (T[5] - (l2 + l3) * T[3] + l2 * l3 * I1) / d1,
            (T[6] - (l2 + l3) * T[4] + l2 * l3 * tr2) / d1,
            (T[5] - (l1 + l3) * T[3] + l1 * l3 * I1) / d2,
            (T[6] - (l1 + l3) * T[4] + l1 * l3 * tr2) / d2,
        ]
        worst = max(worst, *(_rel(p, s) for p, s in zip(pred, S[3:])))
    return worst


def _tetragonal_parts(C, Q):
    A1, A2, N = Q[:, 0], Q[:, 1], Q[:, 2]
    D = sum(np.einsum("i,j,k,l->ijkl", a, a, a, a) for a in (A1, A2))
    H1 = np.einsum("abIJ,IJ->ab", D, C)
    H2 = np.einsum("abIJ,IJ->ab", D, C @ C)
    return H1, H2, np.outer(N, N)


def tetragonal_zeros(n, rng):
    worst = 0.0
    for _ in range(n):
        C = random_C(rng)
        Q = _frame(rng)
        H1, H2, M = _tetragonal_parts(C, Q)
        zeros = [
            np.trace(H1 @ M), np.trace(H1 @ H1 @ M), np.trace(H2 @ M), np.trace(H2 @ H2 @ M),
            np.trace(C @ H1 @ M), np.trace(C @ H2 @ M), np.trace(H1 @ H2 @ M),
        ]  # fmt: skip
        scale = max(1.0, np.abs(C @ C).max() ** 2)
        worst = max(worst, max(abs(z) for z in zeros) / scale)
        worst = max(worst, _rel(np.trace(C @ M), np.trace(C) - np.trace(H1)))
        worst = max(worst, _rel(np.trace(C @ C @ M), np.trace(C @ C) - np.trace(H2)))
    return worst


def cubic_from_tetragonal(n, rng, printed_v8=False):
    """Cubic invariants expressed through tetragonal ones built on the same frame."""
    worst = 0.0
    for _ in range(n):
        C = random_C(rng)
        Q = _frame(rng)
        U = reference_invariants(Symmetry.TETRAGONAL, C, {"A1": Q[:, 0], "A2": Q[:, 1]})
        V = reference_invariants(Symmetry.CUBIC, C, {"A1": Q[:, 0], "A2": Q[:, 1], "A3": Q[:, 2]})
        I1, I2 = U[0], U[1]
        u = {k: U[k - 1] for k in range(4, 14)}
        v = {k: V[k - 1] for k in range(4, 12)}
        out = I1 - u[4]
        tail = 0.5 * I1**2 - I2 - u[7] if printed_v8 else I1**2 - 2 * I2 - u[7]
        worst = max(
            worst,
            _rel(v[4], u[5] + out**2),
            _rel(v[5], u[6] + out**3),
            _rel(v[8], u[10] + out * tail),
        )
    return worst


def hexagonal_zeros(n, rng):
    worst = 0.0
    ang = np.array([0.0, 2.0, 4.0]) * np.pi / 3
    for _ in range(n):
        C = random_C(rng)
        Q = _frame(rng)
        vecs = np.stack([np.cos(ang), np.sin(ang), np.zeros(3)], 1) @ Q.T
        N = Q[:, 2]
        S = sum(np.einsum("i,j,k,l,m,n->ijklmn", a, a, a, a, a, a) for a in vecs)
        M = np.outer(N, N)
        C2 = C @ C
        H1 = np.einsum("IJ,IJabKL,KL->ab", C, S, C)
        H2 = np.einsum("IJ,IJabKL,KL->ab", C2, S, C2)
        H3 = np.einsum("IJ,IJabKL,KL->ab", np.eye(3), S, C)
        H4 = np.einsum("IJ,IJabKL,KL->ab", np.eye(3), S, C2)
        zeros = [
            np.trace(H1 @ M), np.trace(H1 @ H1 @ M), np.trace(H2 @ M), np.trace(H2 @ H2 @ M),
            np.trace(C @ H1 @ M), np.trace(C @ H2 @ M), np.trace(H1 @ H2 @ M),
        ]  # fmt: skip
        scale = max(1.0, np.abs(H2).max() ** 2)
        worst = max(worst, max(abs(z) for z in zeros) / scale)
        worst = max(worst, _rel(np.trace(C @ M), np.trace(C) - 2.0 / 3.0 * np.trace(H3)))
        worst = max(worst, _rel(np.trace(C2 @ M), np.trace(C2) - 2.0 / 3.0 * np.trace(H4)))
    return worst


def ti_reducibility(n, rng, printed_sign=False):
    worst = 0.0
    sign = 1.0 if printed_sign else -1.0
    for _ in range(n):
        C = random_C(rng)
        a = _frame(rng)[:, 0]
        l1, l2 = rng.uniform(0.05, 1.0, 2)
        G = l1 * np.outer(a, a) + l2 * (np.eye(3) - np.outer(a, a))
        R = reference_invariants(Symmetry.TRANSVERSELY_ISOTROPIC, C, {"G": G})
        I1, I2 = R[0], R[1]
        worst = max(
            worst,
            _rel(R[5], (l1 + l2) * R[3] + sign * l1 * l2 * I1),
            _rel(R[6], (l1 + l2) * R[4] + sign * l1 * l2 * (I1**2 - 2 * I2)),
        )
    return worst


SUITE = {
    "cayley_hamilton": cayley_hamilton,
    "orthotropy_equivalence": orthotropy_equivalence,
    "tetragonal_zero_invariants": tetragonal_zeros,
    "cubic_from_tetragonal": cubic_from_tetragonal,
    "hexagonal_zero_invariants": hexagonal_zeros,
    "ti_reducibility": ti_reducibility,
}
