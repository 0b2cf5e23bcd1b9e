import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisocal.errors import DegenerateVectors, DegenerateWeights, KindMismatch
from anisocal.structure import (
    SetKind,
    StructureSpec,
    Symmetry,
    build_g2,
    build_g4,
    build_g6,
    classify,
    classify_pair_tensors,
    direction_vectors,
    param_bounds,
    random_params,
)
from anisocal.tensors import rotation_about


def test_invariant_counts():
    assert [k.n_invariants for k in SetKind] == [3, 7, 11, 13, 12]
    assert [k.n_params for k in SetKind] == [0, 6, 9, 9, 12]


@given(st.integers(0, 10_000))
def test_g2_is_symmetric_psd_unit_trace(seed):
    p = random_params(SetKind.G2, np.random.default_rng(seed))
    p[:3] += 1e-3
    G = build_g2(p)
    assert np.allclose(G, G.T, atol=1e-14)
    assert np.trace(G) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(G).min() > -1e-14


@given(st.integers(0, 10_000))
def test_g4_and_g6_fully_symmetric_and_normalized(seed):
    rng = np.random.default_rng(seed)
    p = random_params(SetKind.G4, rng)
    p[0::3] += 1e-2
    G4 = build_g4(p)
    assert np.allclose(G4, G4.transpose(1, 0, 2, 3)) and np.allclose(G4, G4.transpose(2, 3, 0, 1))
    assert np.allclose(G4, G4.transpose(0, 2, 1, 3))
    A = direction_vectors(p)
    assert np.einsum("iijj->", G4) == pytest.approx(
        np.sum(np.sum(A**2, 1) ** 2) / np.sum(np.sum(A**2, 1) ** 2)
    )
    G6 = build_g6(p)
    assert np.allclose(G6, G6.transpose(1, 0, 2, 3, 4, 5)) and np.allclose(G6, G6.transpose(5, 4, 3, 2, 1, 0))


def test_degenerate_weights():
    with pytest.raises(DegenerateWeights):
        build_g2(np.zeros(6))


def test_degenerate_vectors():
    with pytest.raises(DegenerateVectors):
        build_g4(np.zeros(9))


def test_kind_mismatch():
    with pytest.raises(KindMismatch):
        StructureSpec(SetKind.G2, np.zeros(9))


def test_bounds_contain_random_params(rng):
    for kind in SetKind:
        lo, hi = param_bounds(kind)
        p = random_params(kind, rng)
        assert np.all(p >= lo) and np.all(p <= hi)


@pytest.mark.parametrize(
    "g,expected",
    [
        ([1.0, 1.0, 1.0], Symmetry.ISOTROPIC),
        ([0.0, 0.0, 1.0], Symmetry.TRANSVERSELY_ISOTROPIC),
        ([0.1, 0.1, 0.8], Symmetry.TRANSVERSELY_ISOTROPIC),
        ([0.2, 0.3, 0.5], Symmetry.ORTHOTROPIC),
    ],
)
def test_classify_g2(g, expected):
    spec = StructureSpec(SetKind.G2, [*g, 0.4, 0.2, -0.3])
    assert classify(spec).group is expected


def test_ti_axis_recovered():
    p = np.array([0.05, 0.05, 0.9, 0.7, 0.3, 1.1])
    label = classify(StructureSpec(SetKind.G2, p))
    G = build_g2(p)
    w, v = np.linalg.eigh(G)
    assert abs(label.axis @ v[:, 2]) == pytest.approx(1.0, abs=1e-10)


def _vec_params(vectors):
    out = []
    for a in vectors:
        r = np.linalg.norm(a)
        th = np.arccos(np.clip(a[2] / r, -1, 1))
        ph = np.arctan2(a[1], a[0]) % (2 * np.pi)
        out += [r, th, ph]
    return np.array(out)


def test_classify_g4_cubic_and_tetragonal():
    Q = rotation_about([0.3, -0.2, 0.9], 0.8)
    cubic = _vec_params(Q.T)
    assert classify(StructureSpec(SetKind.G4, cubic)).group is Symmetry.CUBIC
    tet = _vec_params(Q.T * np.array([[1.0], [1.0], [0.5]]))
    label = classify(StructureSpec(SetKind.G4, tet))
    assert label.group is Symmetry.TETRAGONAL
    assert abs(label.axis @ Q[:, 2]) == pytest.approx(1.0, abs=1e-10)


def test_classify_g6_hexagonal():
    ang = np.array([0.0, 2.0, 4.0]) * np.pi / 3
    Q = rotation_about([1.0, 1.0, 0.0], 0.5)
    vecs = np.stack([np.cos(ang), np.sin(ang), np.zeros(3)], 1) @ Q.T
    label = classify(StructureSpec(SetKind.G6, _vec_params(vecs)))
    assert label.group is Symmetry.HEXAGONAL
    assert abs(label.axis @ Q[:, 2]) == pytest.approx(1.0, abs=1e-10)


def test_classify_pairs():
    Q = rotation_about([0.2, 0.5, 0.8], 1.0)
    G1 = Q @ np.diag([0.2, 0.3, 0.5]) @ Q.T
    G2o = Q @ np.diag([0.6, 0.3, 0.1]) @ Q.T
    assert classify_pair_tensors(G1, G2o).group is Symmetry.ORTHOTROPIC
    R = rotation_about([0.0, 0.0, 1.0], np.pi / 6)
    G2m = Q @ R @ np.diag([0.6, 0.3, 0.1]) @ R.T @ Q.T
    mono = classify_pair_tensors(G1, G2m)
    assert mono.group is Symmetry.MONOCLINIC
    assert abs(mono.axis @ Q[:, 2]) == pytest.approx(1.0, abs=1e-8)
    G2t = rotation_about([1.0, 2.0, 0.5], 0.9) @ np.diag([0.6, 0.3, 0.1]) @ rotation_about([1.0, 2.0, 0.5], 0.9).T
    assert classify_pair_tensors(G1, G2t).group is Symmetry.TRICLINIC
    ti = Q @ np.diag([0.1, 0.1, 0.8]) @ Q.T
    assert classify_pair_tensors(ti, 0.5 * ti + 0.5 * np.eye(3) / 3).group is Symmetry.TRANSVERSELY_ISOTROPIC
    assert classify_pair_tensors(np.eye(3) / 3, np.eye(3) / 3).group is Symmetry.ISOTROPIC
