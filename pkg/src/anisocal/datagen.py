"""Deformation sampling, analytic ground-truth materials and dataset files."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache, partial
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .energy import jassemble, jtransform
from .errors import EmptyDataset, IoError, NonInvertible
from .invariants import jinvariants_c
from .structure import SetKind, jrotation
from .tensors import DET_TOL, VOIGT_PAIRS, jvoigt_tangent

# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class SampleConfig:
    lambda1: tuple = (0.8, 1.4)
    lambda2: tuple = (0.8, 1.4)
    J: tuple = (0.9, 1.2)
    theta1: tuple = (0.0, float(np.pi))
    theta2: tuple = (float(-np.pi / 2), float(np.pi / 2))
    theta3: tuple = (float(-np.pi), float(np.pi))
    n_samp: int = 5000
    n_inc: int = 20
    d_tol: float = 0.15
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "J"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise ValueError(f"{name} range must be positive and ordered")
        for name in ("theta1", "theta2", "theta3"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} range must be ordered")
        if self.n_inc < 2 or self.n_samp < 1:
            raise ValueError("n_inc must be >= 2 and n_samp >= 1")

    def bounds(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.J, self.theta1, self.theta2, self.theta3], dtype=float)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SampleConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sample config keys: {sorted(unknown)}")
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


@dataclass(frozen=True)
class LoadPath:
    endpoint: np.ndarray  # (lambda1, lambda2, J, theta1, theta2, theta3)
    U: np.ndarray  # (n_inc, 3, 3) stretch tensors; F = U

    @property
    def F(self) -> np.ndarray:
        return self.U

    def to_dict(self) -> dict:
        return {"endpoint": self.endpoint.tolist(), "U": self.U.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LoadPath":
        return cls(np.asarray(d["endpoint"], dtype=float), np.asarray(d["U"], dtype=float))


def stretch_path(endpoint, n_inc: int) -> np.ndarray:
    """Stretch tensors interpolated linearly in (lambda1, lambda2, J) from identity."""
    l1, l2, J, t1, t2, t3 = endpoint
    Q = np.asarray(jrotation(t1, t2, t3))
    t = np.arange(1, n_inc + 1) / n_inc
    a = 1.0 + t * (l1 - 1.0)
    b = 1.0 + t * (l2 - 1.0)
    j = 1.0 + t * (J - 1.0)
    diag = np.stack([a, b, j / (a * b)], axis=1)
    return np.einsum("Ii,ni,iJ->nIJ", Q.T, diag, Q)


def sample_paths(cfg: SampleConfig) -> list[LoadPath]:
    """Latin hypercube over stretches, volume ratio and orientation angles."""
    sampler = qmc.LatinHypercube(d=6, seed=np.random.default_rng(cfg.seed))
    unit = sampler.random(cfg.n_samp)
    b = cfg.bounds()
    pts = qmc.scale(unit, b[:, 0], b[:, 1]) if np.all(b[:, 1] > b[:, 0]) else b[:, 0] + unit * (b[:, 1] - b[:, 0])
    return [LoadPath(p, stretch_path(p, cfg.n_inc)) for p in pts]


def _strain(U: np.ndarray) -> np.ndarray:
    return 0.5 * (np.einsum("...kI,...kJ->...IJ", U, U) - np.eye(3))


def dedup_delta(paths: list[LoadPath]) -> float:
    E = _strain(np.concatenate([p.U for p in paths]))
    return float(np.max(np.sum(E**2, axis=(1, 2))) / 3.0)


def dedup_filter(paths: list[LoadPath], d_tol: float = 0.15, delta: float | None = None) -> list[LoadPath]:
    """Keep paths that reach at least one state far from every retained state.

    The relative distance between states a and b is
    ``|E_a - E_b|^2 / (relu(|E_b|^2 - delta) + delta)`` with
    ``delta = max |E|^2 / 3`` over the input unless given.
    """
    if not paths:
        raise EmptyDataset("no paths to filter")
    if delta is None:
        delta = dedup_delta(paths)
    kept = [paths[0]]
    states = _strain(paths[0].U).reshape(-1, 9)
    for path in paths[1:]:
        cand = _strain(path.U).reshape(-1, 9)
        sq = np.sum(states**2, axis=1)
        denom = np.maximum(sq - delta, 0.0) + delta
        dist = np.sum((cand[:, None, :] - states[None, :, :]) ** 2, axis=2) / denom[None, :]
        if np.any(np.all(dist >= d_tol, axis=1)):
            kept.append(path)
            states = np.concatenate([states, cand])
    return kept


# ---------------------------------------------------------------------------
# Ground-truth materials


class Family(str, Enum):
    NEO_HOOKE = "neo_hooke"
    TI = "ti"
    ORTHOTROPIC = "orthotropic"
    CUBIC = "cubic"
    HEXAGONAL = "hexagonal"
    MONOCLINIC = "monoclinic"


_FAMILY_SET = {
    Family.NEO_HOOKE: SetKind.ISO,
    Family.TI: SetKind.G2,
    Family.ORTHOTROPIC: SetKind.G2,
    Family.CUBIC: SetKind.G4,
    Family.HEXAGONAL: SetKind.G6,
    Family.MONOCLINIC: SetKind.PAIR,
}
# invariant indices penalized by k/2 (I - I(1))^2
_FAMILY_TERMS = {
    Family.NEO_HOOKE: (),
    Family.TI: (3,),
    Family.ORTHOTROPIC: (3,),
    Family.CUBIC: (),
    Family.HEXAGONAL: (3, 5),
    Family.MONOCLINIC: (3, 7),
}
# invariant combinations added linearly, k * sum w (I - I(1)). For the cubic
# family 4.5 (L5 - L5(1)) - 3 (L4 - L4(1)) = 1/2 sum_a (a.C.a - 1)^2, which is
# stress free at F = 1 and anisotropic already for small strains; a square of
# L5 alone would only add isotropic stiffness there.
_FAMILY_LINEAR = {Family.CUBIC: ((4, 4.5), (3, -3.0))}


@dataclass(frozen=True)
class GroundTruth:
    family: Family
    E: float = 1.0
    nu: float = 0.4
    k: float = 0.5
    Q: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float).reshape(3, 3))
        if self.E <= 0 or not -1.0 < self.nu < 0.5:
            raise ValueError("need E > 0 and -1 < nu < 0.5")
        if abs(np.linalg.det(self.Q) - 1.0) > 1e-8 or np.abs(self.Q.T @ self.Q - np.eye(3)).max() > 1e-8:
            raise ValueError("Q must be a proper rotation")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def set_kind(self) -> SetKind:
        return _FAMILY_SET[self.family]

    @property
    def axis(self) -> np.ndarray:
        """Preferred direction (TI fibre, hexagonal/tetragonal normal)."""
        return self.Q[:, 2]

    def tensors(self) -> tuple:
        Q = self.Q
        fam = self.family
        if fam is Family.NEO_HOOKE:
            return ()
        if fam is Family.TI:
            a = Q[:, 2]
            return (np.outer(a, a),)
        if fam is Family.ORTHOTROPIC:
            return (Q @ np.diag([0.2, 0.3, 0.5]) @ Q.T,)
        if fam is Family.CUBIC:
            return (sum(np.einsum("i,j,k,l->ijkl", a, a, a, a) for a in Q.T) / 3.0,)
        if fam is Family.HEXAGONAL:
            vecs = self.hexagonal_vectors()
            return (sum(np.einsum("i,j,k,l,m,n->ijklmn", a, a, a, a, a, a) for a in vecs) / 3.0,)
        R = Rotation.from_rotvec([0.0, 0.0, np.pi / 6]).as_matrix()
        G1 = Q @ np.diag([0.2, 0.3, 0.5]) @ Q.T
        G2 = Q @ R @ np.diag([0.6, 0.3, 0.1]) @ R.T @ Q.T
        return (G1, G2)

    def hexagonal_vectors(self) -> np.ndarray:
        angles = np.array([0.0, 2.0, 4.0]) * np.pi / 3
        local = np.stack([np.cos(angles), np.sin(angles), np.zeros(3)], axis=1)
        return local @ self.Q.T

    def to_dict(self) -> dict:
        return {"family": self.family.value, "E": self.E, "nu": self.nu, "k": self.k, "Q": self.Q.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(d["family"], d.get("E", 1.0), d.get("nu", 0.4), d.get("k", 0.5), d.get("Q", np.eye(3)))


def random_rotation(seed: int) -> np.ndarray:
    return Rotation.random(random_state=np.random.default_rng(seed)).as_matrix()


def _gt_response(kind: SetKind, terms: tuple, linear: tuple, tensors, mu, lam, k, F):
    C = F.T @ F
    u, gu, hu = jinvariants_c(kind, C, tensors, 2)
    u0 = jinvariants_c(kind, jnp.eye(3), tensors, 0)[0]
    i1, i3 = u[0], u[2]
    log3 = jnp.log(i3)
    psi = 0.5 * (mu * (i1 - log3 - 3.0) + 0.5 * lam * (i3 - log3 - 1.0))
    n = u.shape[0]
    d = jnp.zeros(n).at[0].set(0.5 * mu).at[2].set(0.5 * (-mu / i3 + 0.5 * lam * (1.0 - 1.0 / i3)))
    h = jnp.zeros((n, n)).at[2, 2].set(0.5 * (mu + 0.5 * lam) / i3**2)
    for t in terms:
        du = u[t] - u0[t]
        psi = psi + 0.5 * k * du**2
        d = d.at[t].add(k * du)
        h = h.at[t, t].add(k)
    for t, w in linear:
        psi = psi + k * w * (u[t] - u0[t])
        d = d.at[t].add(k * w)
    P, A = jassemble(F, d, h, gu, hu, 2)
    sigma, c, _, _ = jtransform(F, P, A)
    return psi, P, A, sigma, c


@lru_cache(maxsize=None)
def _gt_fn(kind: SetKind, terms: tuple, linear: tuple, batched: bool):
    fn = partial(_gt_response, kind, terms, linear)
    if batched:
        fn = jax.vmap(fn, in_axes=(None, None, None, None, 0))
    return jax.jit(fn)


def ground_truth_eval(gt: GroundTruth, F):
    """Exact energy, stress and tangents of an analytic material."""
    from .energy import MaterialResponse
    from .tensors import check_deformation

    F = check_deformation(F)
    tensors = tuple(jnp.asarray(t) for t in gt.tensors())
    psi, P, A, sigma, c = _gt_fn(gt.set_kind, _FAMILY_TERMS[gt.family], _FAMILY_LINEAR.get(gt.family, ()), False)(
        tensors, gt.mu, gt.lam, gt.k, jnp.asarray(F)
    )
    return MaterialResponse(float(psi), np.asarray(P), np.asarray(A), np.asarray(sigma), np.asarray(c))


# ---------------------------------------------------------------------------
# Datasets


@dataclass
class Dataset:
    """Column-oriented dataset: ``F (N,3,3)``, ``psi (N,)``, ``sigma (N,6)``, ``c (N,6,6)``."""

    F: np.ndarray
    psi: np.ndarray
    sigma: np.ndarray
    c: np.ndarray | None
    path: np.ndarray
    inc: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.psi)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(int)
        return Dataset(
            self.F[idx],
            self.psi[idx],
            self.sigma[idx],
            None if self.c is None else self.c[idx],
            self.path[idx],
            self.inc[idx],
            dict(self.meta),
        )

    def select_paths(self, path_ids) -> "Dataset":
        return self.subset(np.flatnonzero(np.isin(self.path, list(path_ids))))

    def records(self) -> list[dict]:
        out = []
        for n in range(len(self)):
            rec = {
                "F": self.F[n].ravel().tolist(),
                "psi": float(self.psi[n]),
                "sigma_voigt": self.sigma[n].tolist(),
                "path": int(self.path[n]),
                "inc": int(self.inc[n]),
            }
            if self.c is not None:
                rec["c_voigt"] = self.c[n].ravel().tolist()
            out.append(rec)
        return out

    @classmethod
    def from_records(cls, records: list[dict], meta: dict | None = None) -> "Dataset":
        if not records:
            raise EmptyDataset("dataset has no records")
        has_c = all("c_voigt" in r for r in records)
        return cls(
            F=np.array([np.reshape(r["F"], (3, 3)) for r in records], dtype=float),
            psi=np.array([r["psi"] for r in records], dtype=float),
            sigma=np.array([r["sigma_voigt"] for r in records], dtype=float),
            c=np.array([np.reshape(r["c_voigt"], (6, 6)) for r in records], dtype=float) if has_c else None,
            path=np.array([r.get("path", 0) for r in records], dtype=int),
            inc=np.array([r.get("inc", 0) for r in records], dtype=int),
            meta=dict(meta or {}),
        )


def _gt_batch(gt: GroundTruth, Fs: np.ndarray):
    tensors = tuple(jnp.asarray(t) for t in gt.tensors())
    fn = _gt_fn(gt.set_kind, _FAMILY_TERMS[gt.family], _FAMILY_LINEAR.get(gt.family, ()), True)
    psi, _, _, sigma, c = fn(tensors, gt.mu, gt.lam, gt.k, jnp.asarray(Fs))
    return np.asarray(psi), np.asarray(sigma), np.asarray(c)


def build_dataset(gt: GroundTruth, paths: list[LoadPath]) -> Dataset:
    """Evaluate the ground truth along every path increment."""
    if not paths:
        raise EmptyDataset("no paths given")
    Fs, pid, inc = [], [], []
    for p, path in enumerate(paths):
        for n, F in enumerate(path.F):
            if not np.linalg.det(F) > DET_TOL:
                warnings.warn(f"path {p} increment {n} skipped: {NonInvertible.__name__}")
                continue
            Fs.append(F)
            pid.append(p)
            inc.append(n)
    Fs = np.asarray(Fs)
    psi, sigma, c = _gt_batch(gt, Fs)
    idx = np.array(VOIGT_PAIRS)
    sigma_v = sigma[:, idx[:, 0], idx[:, 1]]
    c_v = np.asarray(jax.vmap(jvoigt_tangent)(jnp.asarray(c)))
    return Dataset(Fs, psi, sigma_v, c_v, np.asarray(pid), np.asarray(inc), {"ground_truth": gt.to_dict()})


def split(dataset: Dataset, ratio: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded record-level calibration/test split."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    n_cal = int(round(ratio * n))
    return dataset.subset(np.sort(perm[:n_cal])), dataset.subset(np.sort(perm[n_cal:]))


UNITS = {"F": "1", "psi": "MPa", "sigma_voigt": "MPa", "c_voigt": "MPa", "path": "id", "inc": "id"}


def write_jsonl(dataset: Dataset, path) -> None:
    path = Path(path)
    try:
        with open(path, "w") as fh:
            for rec in dataset.records():
                fh.write(json.dumps(rec) + "\n")
        header = {
            "format": "jsonl",
            "records": len(dataset),
            "units": UNITS,
            "voigt_order": ["11", "22", "33", "23", "13", "12"],
            "F_layout": "row-major 3x3",
            "meta": dataset.meta,
        }
        path.with_name(path.name + ".header.json").write_text(json.dumps(header, indent=1))
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_jsonl(path) -> Dataset:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    records = [json.loads(line) for line in lines if line.strip()]
    header = path.with_name(path.name + ".header.json")
    meta = json.loads(header.read_text()).get("meta", {}) if header.exists() else {}
    return Dataset.from_records(records, meta)


def csv_columns() -> list[str]:
    cols = ["path", "inc", "psi"]
    cols += [f"F{i + 1}{j + 1}" for i in range(3) for j in range(3)]
    cols += [f"sigma{i + 1}{j + 1}" for i, j in VOIGT_PAIRS]
    cols += [f"c{a + 1}{b + 1}" for a in range(6) for b in range(6)]
    return cols


def write_csv(dataset: Dataset, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(csv_columns())
            for n in range(len(dataset)):
                c = dataset.c[n].ravel() if dataset.c is not None else np.full(36, np.nan)
                w.writerow(
                    [int(dataset.path[n]), int(dataset.inc[n]), repr(float(dataset.psi[n]))]
                    + [repr(float(x)) for x in dataset.F[n].ravel()]
                    + [repr(float(x)) for x in dataset.sigma[n]]
                    + [repr(float(x)) for x in c]
                )
    except OSError as exc:
        raise IoError(str(exc)) from exc


def write_paths(paths: list[LoadPath], path, cfg: SampleConfig | None = None) -> None:
    doc = {"config": None if cfg is None else cfg.to_dict(), "paths": [p.to_dict() for p in paths]}
    Path(path).write_text(json.dumps(doc))


def read_paths(path) -> list[LoadPath]:
    doc = json.loads(Path(path).read_text())
    return [LoadPath.from_dict(p) for p in doc["paths"]]
