import csv
import time

import numpy as np
import pytest

from anisocal.analysis import (
    CORRELATION_HEADER,
    correlation_channels,
    correlation_export,
    direction,
    ellipticity_scan,
    elastic_surface,
    sphere_grid,
    write_surface,
    youngs_modulus,
    compliance_mandel,
)
from anisocal.datagen import GroundTruth, SampleConfig, build_dataset, ground_truth_eval, random_rotation, sample_paths
from anisocal.energy import evaluate_batch
from anisocal.errors import AsymmetryTooLarge, SingularTangent
from anisocal.network import random_artifact
from anisocal.tensors import VOIGT_PAIRS, voigt_tangent

I = np.eye(3)


def isotropic_tangent(E=1.0, nu=0.4):
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return lam * np.einsum("ij,kl->ijkl", I, I) + mu * (np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I))


def test_grid_covers_sphere():
    theta, phi = sphere_grid(np.pi / 90)
    assert theta.min() == 0.0 and theta.max() == pytest.approx(np.pi)
    assert phi.min() == 0.0 and phi.max() < 2 * np.pi
    assert np.allclose(np.linalg.norm(direction(theta, phi), axis=1), 1.0)


def test_isotropic_surface_is_constant():
    s = elastic_surface(isotropic_tangent())
    assert np.abs(s.modulus - 1.0).max() < 1e-8


def test_neo_hooke_acoustic_minimum_is_shear_modulus():
    A = ground_truth_eval(GroundTruth("neo_hooke"), I).A
    r = ellipticity_scan(A)
    assert r.min_eigenvalue == pytest.approx(1 / 2.8, abs=1e-6)
    assert r.elliptic


def test_indefinite_tangent_not_elliptic():
    A = -0.5 * (np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I))
    r = ellipticity_scan(A)
    assert not r.elliptic
    assert r.min_eigenvalue < 0


def test_asymmetric_tangent_rejected(rng):
    with pytest.raises(AsymmetryTooLarge):
        ellipticity_scan(rng.standard_normal((3, 3, 3, 3)))


def test_scan_refinement_and_speed(rng):
    gt = GroundTruth("ti", Q=random_rotation(3))
    A = ground_truth_eval(gt, np.array([[1.1, 0.05, 0.0], [0.0, 0.95, 0.1], [0.02, 0.0, 1.05]])).A
    t = time.perf_counter()
    coarse = ellipticity_scan(A, np.pi / 180)
    assert time.perf_counter() - t < 1.0
    fine = ellipticity_scan(A, np.pi / 360)
    assert abs(coarse.min_eigenvalue - fine.min_eigenvalue) < 1e-3 * abs(fine.min_eigenvalue)
    assert fine.min_eigenvalue <= coarse.min_eigenvalue + 1e-15


def test_cubic_extrema_on_cube_axes():
    c = ground_truth_eval(GroundTruth("cubic"), I).c
    s = elastic_surface(c)
    ext = s.extrema()
    axes = youngs_modulus(compliance_mandel(c)[0], I)
    assert np.ptp(axes) < 1e-10 * axes[0]
    on_axis = [abs(axes[0] - ext["max"]), abs(axes[0] - ext["min"])]
    assert min(on_axis) < 1e-10 * axes[0]


def test_rotated_cubic_extremum_follows_axes():
    Q = random_rotation(8)
    c = ground_truth_eval(GroundTruth("cubic", Q=Q), I).c
    s = elastic_surface(c, np.pi / 180)
    E_axes = youngs_modulus(compliance_mandel(c)[0], Q.T)
    ext = s.extrema()
    key = "max" if abs(E_axes[0] - ext["max"]) < abs(E_axes[0] - ext["min"]) else "min"
    cosines = np.abs(Q.T @ ext[f"{key}_dir"])
    assert np.degrees(np.arccos(min(cosines.max(), 1.0))) < 3.0
    assert ext[key] == pytest.approx(E_axes[0], rel=1e-3)


def test_surface_inversion_symmetric(rng):
    c = ground_truth_eval(GroundTruth("monoclinic", Q=random_rotation(4)), np.diag([1.1, 0.95, 1.0])).c
    s = elastic_surface(c, np.pi / 30)
    S = compliance_mandel(c)[0]
    n = direction(s.theta, s.phi)
    assert np.allclose(youngs_modulus(S, -n), s.modulus, rtol=1e-12)


def test_singular_tangent_rejected():
    with pytest.raises(SingularTangent):
        elastic_surface(np.zeros((3, 3, 3, 3)))


def test_write_surface(tmp_path):
    s = elastic_surface(isotropic_tangent(), np.pi / 10)
    write_surface(s, tmp_path / "surf.csv")
    rows = list(csv.reader(open(tmp_path / "surf.csv")))
    assert rows[0] == ["theta", "phi", "E", "x", "y", "z"]
    assert len(rows) == len(s) + 1
    assert "splot 'surf.csv'" in (tmp_path / "surf.gp").read_text()


def _self_dataset(model, n_paths=2):
    ds = build_dataset(GroundTruth("neo_hooke"), sample_paths(SampleConfig(n_samp=20, n_inc=4, seed=2))[:n_paths])
    psi, _, sigma, c = evaluate_batch(model, ds.F)
    idx = np.array(VOIGT_PAIRS)
    ds.psi = psi
    ds.sigma = sigma[:, idx[:, 0], idx[:, 1]]
    ds.c = np.stack([voigt_tangent(x) for x in c])
    return ds


def test_correlation_export_perfect_model(tmp_path, rng):
    model = random_artifact("g2", rng)
    ds = _self_dataset(model)
    n = correlation_export(model, ds, tmp_path / "corr.csv")
    rows = list(csv.reader(open(tmp_path / "corr.csv")))
    assert rows[0] == CORRELATION_HEADER
    assert n == len(rows) - 1 == len(ds) * len(correlation_channels())
    assert max(abs(float(r[2]) - float(r[3])) for r in rows[1:]) < 1e-10
    per_channel = {}
    for r in rows[1:]:
        per_channel[r[1]] = per_channel.get(r[1], 0) + 1
    assert set(per_channel.values()) == {len(ds)}


def test_correlation_channel_names_stable():
    names = correlation_channels()
    assert names[:7] == ["psi", "sigma11", "sigma22", "sigma33", "sigma23", "sigma13", "sigma12"]
    assert len(names) == 43 and names == correlation_channels()
