"""Ellipticity scans, directional Young's modulus surfaces and correlation exports."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np

from .energy import _consts, trainables
from .errors import AsymmetryTooLarge, EmptyDataset, IoError, SingularTangent
from .tensors import VOIGT_PAIRS, mandel_matrix
from .training import _predict

SYMMETRY_TOL = 1e-9
COND_LIMIT = 1e12


def direction(theta, phi) -> np.ndarray:
    """Unit vectors ``(sin t cos p, sin t sin p, cos t)`` stacked on the last axis."""
    theta, phi = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta) * np.ones_like(phi)], axis=-1)


def sphere_grid(step: float) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (theta, phi) grid: theta in [0, pi] inclusive, phi in [0, 2 pi)."""
    if step <= 0:
        raise ValueError("step must be positive")
    n_t = int(round(np.pi / step)) + 1
    n_p = int(round(2 * np.pi / step))
    theta = np.linspace(0.0, np.pi, n_t)
    phi = np.arange(n_p) * (2 * np.pi / n_p)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return T.ravel(), P.ravel()


@dataclass(frozen=True)
class EllipticityResult:
    min_eigenvalue: float
    theta: float
    phi: float
    elliptic: bool
    symmetry_residual: float

    @property
    def direction(self) -> np.ndarray:
        return direction(self.theta, self.phi)

    def to_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "theta": self.theta,
            "phi": self.phi,
            "elliptic": self.elliptic,
            "symmetry_residual": self.symmetry_residual,
        }


def acoustic_tensors(A, normals) -> np.ndarray:
    """``gamma_ik = A_iJkL N_J N_L`` for every row of ``normals``."""
    return np.einsum("iJkL,nJ,nL->nik", np.asarray(A, dtype=float), normals, normals)


def ellipticity_scan(A, step: float = np.pi / 180) -> EllipticityResult:
    """Smallest acoustic-tensor eigenvalue over a direction grid."""
    A = np.asarray(A, dtype=float).reshape(3, 3, 3, 3)
    theta, phi = sphere_grid(step)
    N = direction(theta, phi)
    gam = acoustic_tensors(A, N)
    scale = max(float(np.max(np.abs(A))), 1e-300)
    resid = float(np.max(np.abs(gam - gam.transpose(0, 2, 1)))) / scale
    if resid > SYMMETRY_TOL:
        raise AsymmetryTooLarge(f"acoustic tensor asymmetric (relative residual {resid:.3g})")
    eig = np.linalg.eigvalsh(0.5 * (gam + gam.transpose(0, 2, 1)))[:, 0]
    k = int(np.argmin(eig))
    lam = float(eig[k])
    return EllipticityResult(lam, float(theta[k]), float(phi[k]), lam >= -1e-9 * scale, resid)


@dataclass(frozen=True)
class SurfaceGrid:
    theta: np.ndarray
    phi: np.ndarray
    modulus: np.ndarray
    major_residual: float = 0.0

    def __len__(self) -> int:
        return len(self.modulus)

    def points(self) -> np.ndarray:
        """Cartesian points ``E(n) n`` for plotting."""
        return self.modulus[:, None] * direction(self.theta, self.phi)

    def extrema(self) -> dict:
        i, j = int(np.argmax(self.modulus)), int(np.argmin(self.modulus))
        return {
            "max": float(self.modulus[i]),
            "max_dir": direction(self.theta[i], self.phi[i]),
            "min": float(self.modulus[j]),
            "min_dir": direction(self.theta[j], self.phi[j]),
        }


def compliance_mandel(c) -> tuple[np.ndarray, float]:
    """Mandel compliance of a (major-symmetrized) tangent and the major-symmetry residual."""
    c = np.asarray(c, dtype=float).reshape(3, 3, 3, 3)
    major = c.transpose(2, 3, 0, 1)
    resid = float(np.max(np.abs(c - major)) / max(np.max(np.abs(c)), 1e-300))
    M = mandel_matrix(0.5 * (c + major))
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularTangent(f"tangent not invertible (condition number {cond:.3g})")
    return np.linalg.inv(M), resid


def youngs_modulus(S_mandel, normals) -> np.ndarray:
    """``1 / (n n : S : n n)`` for each direction."""
    idx = np.array(VOIGT_PAIRS)
    w = np.array([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])
    nn = normals[:, idx[:, 0]] * normals[:, idx[:, 1]] * w
    return 1.0 / np.einsum("na,ab,nb->n", nn, S_mandel, nn)


def elastic_surface(c, step: float = np.pi / 90) -> SurfaceGrid:
    """Directional Young's modulus of a tangent over the unit sphere."""
    S, resid = compliance_mandel(c)
    theta, phi = sphere_grid(step)
    E = youngs_modulus(S, direction(theta, phi))
    return SurfaceGrid(theta, phi, E, resid)


def write_surface(surface: SurfaceGrid, path, gnuplot: bool = True) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "phi", "E", "x", "y", "z"])
            for t, p, e, xyz in zip(surface.theta, surface.phi, surface.modulus, surface.points()):
                w.writerow([repr(float(t)), repr(float(p)), repr(float(e))] + [repr(float(v)) for v in xyz])
        if gnuplot:
            path.with_suffix(".gp").write_text(gnuplot_script(path.name))
    except OSError as exc:
        raise IoError(str(exc)) from exc


def gnuplot_script(csv_name: str) -> str:
    return (
        "set datafile separator ','\n"
        "set view equal xyz\n"
        "set xlabel 'x'; set ylabel 'y'; set zlabel 'z'\n"
        "set palette rgb 33,13,10\n"
        f"splot '{csv_name}' every ::1 using 4:5:6:3 with points pointtype 7 pointsize 0.3 palette title 'E(n) [MPa]'\n"
        "pause -1\n"
    )


CORRELATION_HEADER = ["record", "channel", "reference", "predicted"]


def correlation_channels() -> list[str]:
    names = ["psi"] + [f"sigma{i + 1}{j + 1}" for i, j in VOIGT_PAIRS]
    names += [f"c{a + 1}{b + 1}" for a in range(6) for b in range(6)]
    return names


def correlation_rows(model, dataset) -> list[tuple]:
    """Long-format (record, channel, reference, predicted) rows."""
    if len(dataset) == 0:
        raise EmptyDataset("correlation export needs records")
    order = 2 if dataset.c is not None else 1
    pred = jax.jit(jax.vmap(partial(_predict, model.kind, order=order), in_axes=(None, None, 0)))
    psi, sig, cv = (np.asarray(a) for a in pred(trainables(model), _consts(model), jnp.asarray(dataset.F)))
    names = correlation_channels()
    rows = []
    for n in range(len(dataset)):
        ref = [dataset.psi[n], *dataset.sigma[n]]
        got = [psi[n], *sig[n]]
        if dataset.c is not None:
            ref += list(dataset.c[n].ravel())
            got += list(cv[n].ravel())
        for name, r, p in zip(names, ref, got):
            rows.append((n, name, float(r), float(p)))
    return rows


def correlation_export(model, dataset, path) -> int:
    rows = correlation_rows(model, dataset)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CORRELATION_HEADER)
            for row in rows:
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return len(rows)
