import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisocal.energy import (
    correction_coefficients,
    evaluate,
    evaluate_batch,
    evaluate_coord,
    growth,
    stiffness_scale,
    transform_measures,
)
from anisocal.errors import NonInvertible
from anisocal.network import COORD, MODEL_KINDS, random_artifact
from anisocal.structure import build_g2
from anisocal.tensors import rotation_about

from conftest import central_diff, random_F


def _model(kind, seed):
    rng = np.random.default_rng(seed)
    return random_artifact(kind, rng, q=None if kind == COORD else rng.uniform(0.1, 1.0, _n(kind)))


def _n(kind):
    from anisocal.structure import SetKind

    return SetKind(kind).n_invariants


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_undeformed_state_is_stress_free(kind):
    for seed in range(5):
        m = _model(kind, seed)
        r = evaluate(m, np.eye(3), order=1)
        assert r.psi == 0.0
        assert np.abs(r.P).max() <= 1e-10 * stiffness_scale(m)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_stress_and_tangent_match_fd(kind, rng):
    m = _model(kind, 3)
    F = random_F(rng)
    r = evaluate(m, F)
    P_fd = central_diff(lambda x: evaluate(m, x, order=0).psi, F)
    A_fd = central_diff(lambda x: evaluate(m, x, order=1).P, F)
    assert np.allclose(r.P, P_fd, rtol=1e-5, atol=1e-7 * np.abs(r.P).max())
    assert np.allclose(r.A, A_fd, rtol=1e-4, atol=1e-6 * np.abs(r.A).max())


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_objectivity(kind, rng):
    m = _model(kind, 4)
    F = random_F(rng)
    R = rotation_about(rng.standard_normal(3), 2.0)
    assert evaluate(m, R @ F, order=0).psi == pytest.approx(evaluate(m, F, order=0).psi, rel=1e-12, abs=1e-15)


def test_transversely_isotropic_model_symmetry(rng):
    m = _model("g2", 5).with_updates(structure_params=np.array([0.2, 0.2, 0.9, 0.4, -0.3, 1.2]))
    G = build_g2(m.structure_params)
    axis = np.linalg.eigh(G)[1][:, 2]
    for _ in range(20):
        F = random_F(rng)
        R = rotation_about(axis, rng.uniform(0, 2 * np.pi))
        a = evaluate(m, F, order=0).psi
        assert evaluate(m, F @ R.T, order=0).psi == pytest.approx(a, rel=1e-10, abs=1e-14)


def test_zero_output_weights_give_zero_coefficients(rng):
    m = _model("pair", 6)
    pnn = dict(m.pnn, out_w=np.zeros_like(m.pnn["out_w"]))
    co = correction_coefficients(m.with_updates(pnn=pnn))
    assert set(co.values) == {"m", "n", "o", "p", "q", "r"}
    assert all(v == 0.0 for v in co.values.values())


def test_g2_coefficient_names():
    assert set(correction_coefficients(_model("g2", 0)).values) == {"m", "n", "o"}


def test_transform_at_identity(rng):
    A = rng.standard_normal((3, 3, 3, 3))
    t = transform_measures(np.eye(3), np.zeros((3, 3)), A)
    assert not t["sigma"].any()
    assert np.allclose(t["c"], A)


def test_transform_uniaxial():
    F = np.diag([2.0, 1.0, 1.0])
    P = np.diag([1.0, 0.0, 0.0])
    t = transform_measures(F, P, np.zeros((3, 3, 3, 3)))
    assert np.allclose(t["sigma"], np.diag([1.0, 0.0, 0.0]))
    assert np.allclose(t["T"], np.diag([0.5, 0.0, 0.0]))


@pytest.mark.parametrize("kind", ["g2", "pair", COORD])
def test_spatial_tangent_symmetries(kind, rng):
    c = evaluate(_model(kind, 7), random_F(rng)).c
    scale = np.abs(c).max()
    assert np.abs(c - c.transpose(1, 0, 2, 3)).max() < 1e-9 * scale
    assert np.abs(c - c.transpose(0, 1, 3, 2)).max() < 1e-9 * scale
    assert np.abs(c - c.transpose(2, 3, 0, 1)).max() < 1e-9 * scale


def test_growth_term():
    assert growth(1.0, 1.0, 3) == 0.0
    assert growth(0.01, 1.0, 3) > growth(0.5, 1.0, 3) > 0.0


@given(st.floats(0.05, 20.0))
def test_growth_inversion_symmetric(J):
    assert growth(J, 0.01, 3) == pytest.approx(growth(1.0 / J, 0.01, 3), rel=1e-12)


def test_non_invertible_rejected():
    with pytest.raises(NonInvertible):
        evaluate(_model("g2", 0), np.diag([1.0, 1.0, 0.0]))


def test_evaluate_coord_rejects_invariant_model():
    with pytest.raises(ValueError):
        evaluate_coord(_model("g2", 0), np.eye(3))


@settings(max_examples=10)
@given(st.integers(0, 1000))
def test_batch_matches_single(seed):
    rng = np.random.default_rng(seed)
    m = _model("g4", seed)
    Fs = np.stack([random_F(rng) for _ in range(3)])
    psi, P, sigma, c = evaluate_batch(m, Fs)
    for k, F in enumerate(Fs):
        r = evaluate(m, F)
        assert psi[k] == pytest.approx(r.psi, rel=1e-12, abs=1e-15)
        assert np.allclose(sigma[k], r.sigma, rtol=1e-12, atol=1e-15)
