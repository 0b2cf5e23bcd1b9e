import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import identity_suite as ids
from anisocal.errors import KindMismatch, UnsupportedGroup
from anisocal.invariants import INVARIANT_NAMES, invariant_bundle, reference_invariants
from anisocal.structure import SetKind, StructureSpec, Symmetry, random_params
from anisocal.tensors import rotation_about

from conftest import central_diff, random_F

KINDS = [SetKind.ISO, SetKind.G2, SetKind.G4, SetKind.G6, SetKind.PAIR]


def _spec(kind, rng):
    if kind is SetKind.ISO:
        return None
    p = random_params(kind, rng)
    if kind in (SetKind.G4, SetKind.G6):
        p[0::3] += 0.1
    else:
        p[:3] += 0.05
        if kind is SetKind.PAIR:
            p[6:9] += 0.05
    return StructureSpec(kind, p)


def test_g2_values_at_stretch():
    spec = StructureSpec(SetKind.G2, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    b = invariant_bundle(SetKind.G2, np.diag([1.0, 1.0, 2.0]), spec)
    assert np.allclose(b.values, [6, 9, 4, 4, 16, 4, 16])
    assert b.names == INVARIANT_NAMES[SetKind.G2]


@pytest.mark.parametrize("kind", KINDS)
def test_derivatives_match_finite_differences(kind, rng):
    spec = _spec(kind, rng)
    F = random_F(rng)
    b = invariant_bundle(kind, F, spec)
    dF = central_diff(lambda x: invariant_bundle(kind, x, spec, 0).values, F)
    ddF = central_diff(lambda x: invariant_bundle(kind, x, spec, 1).dF, F)
    assert np.allclose(b.dF, dF, rtol=1e-6, atol=1e-7 * np.abs(b.dF).max())
    assert np.allclose(b.ddF, ddF, rtol=1e-5, atol=1e-6 * np.abs(b.ddF).max())


@pytest.mark.parametrize("kind", KINDS)
def test_hessian_major_symmetry(kind, rng):
    b = invariant_bundle(kind, random_F(rng), _spec(kind, rng))
    assert np.allclose(b.ddF, b.ddF.transpose(0, 3, 4, 1, 2), atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_objectivity(kind, rng):
    spec = _spec(kind, rng)
    F = random_F(rng)
    R = rotation_about(rng.standard_normal(3), 1.1)
    a = invariant_bundle(kind, F, spec, 0).values
    b = invariant_bundle(kind, R @ F, spec, 0).values
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_ti_material_symmetry(rng):
    spec = StructureSpec(SetKind.G2, [0.1, 0.1, 0.8, 0.4, -0.3, 1.2])
    G = spec.realize()[0]
    axis = np.linalg.eigh(G)[1][:, 2]
    F = random_F(rng)
    R = rotation_about(axis, 0.77)
    a = invariant_bundle(SetKind.G2, F, spec, 0).values
    b = invariant_bundle(SetKind.G2, F @ R.T, spec, 0).values
    assert np.allclose(a, b, rtol=1e-12)


@given(st.integers(0, 10_000))
def test_i2_equals_half_trace_difference(seed):
    F = random_F(np.random.default_rng(seed))
    C = F.T @ F
    I1, I2, _ = invariant_bundle(SetKind.ISO, F, None, 0).values
    assert I2 == pytest.approx(0.5 * (I1**2 - np.trace(C @ C)), rel=1e-12)


def test_kind_mismatch(rng):
    with pytest.raises(KindMismatch):
        invariant_bundle(SetKind.G4, np.eye(3), _spec(SetKind.G2, rng))


def test_unsupported_reference_group():
    with pytest.raises(UnsupportedGroup):
        reference_invariants(Symmetry.INDETERMINATE, np.eye(3), {})


def test_cubic_structure_l_invariants_match_reference(rng):
    Q = rotation_about([0.1, 0.7, -0.4], 0.9)
    vecs = Q.T
    p = []
    for a in vecs:
        p += [1.0, np.arccos(a[2]), np.arctan2(a[1], a[0]) % (2 * np.pi)]
    F = random_F(rng)
    C = F.T @ F
    L = invariant_bundle(SetKind.G4, F, StructureSpec(SetKind.G4, p), 0).values
    V = reference_invariants(Symmetry.CUBIC, C, {"A1": Q[:, 0], "A2": Q[:, 1], "A3": Q[:, 2]})
    # G4 is normalized by the number of vectors, so H1 = H1_cub / 3
    assert L[4] == pytest.approx(V[3] / 9.0, rel=1e-12)
    assert L[5] == pytest.approx(V[4] / 27.0, rel=1e-12)
    assert L[3] == pytest.approx(np.trace(C) / 3.0, rel=1e-12)


@pytest.mark.parametrize("name", sorted(ids.SUITE))
def test_identity_suite_small(name, rng):
    assert ids.SUITE[name](25, rng) < 1e-9


def test_printed_cubic_v8_form_is_wrong(rng):
    assert ids.cubic_from_tetragonal(5, rng, printed_v8=True) > 1e-3


def test_printed_ti_sign_is_wrong(rng):
    assert ids.ti_reducibility(5, rng, printed_sign=True) > 1e-3
